//! Discrete Legendre transform `H*(x, q, u) = max_v { v.q - H(x, v, u) }`
//! over a symmetric tensor grid of velocities.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::format::fmt12;
use crate::hamiltonian::HamiltonianSpec;

/// Symmetric lattice `{-v_max, ..., 0, ..., v_max}^d` with `m` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityGrid {
    v_max: f64,
    m: usize,
    d: usize,
}

impl VelocityGrid {
    pub fn new(v_max: f64, m: usize, d: usize) -> Result<Self> {
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::Precondition(format!("v_max must be positive and finite, got {v_max}")));
        }
        if m < 3 || m.is_multiple_of(2) {
            return Err(Error::Precondition(format!("velocity grid size must be odd and >= 3, got {m}")));
        }
        if d != 1 && d != 2 {
            return Err(Error::Precondition(format!("velocity grid dimension must be 1 or 2, got {d}")));
        }
        if m.checked_pow(d as u32).is_none_or(|len| len > 1 << 24) {
            return Err(Error::Precondition(format!("velocity grid with {m}^{d} points is too large")));
        }
        Ok(VelocityGrid { v_max, m, d })
    }

    /// The grid whose steps move exactly `j` nodes of spacing `h` in time `dt`,
    /// for `|j| <= j_max`.
    pub fn commensurate(h: f64, dt: f64, j_max: usize, d: usize) -> Result<Self> {
        VelocityGrid::new(j_max as f64 * h / dt, 2 * j_max + 1, d)
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Points per axis.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.v_max / (self.m - 1) as f64
    }

    /// Axis coordinate of index `k`; index `(m-1)/2` is exactly zero.
    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        (k as f64 - ((self.m - 1) / 2) as f64) * self.spacing()
    }

    /// Writes flat point `j` (`j = k0 * m + k1` in 2-D) into `out[..d]`.
    #[inline]
    pub fn point(&self, j: usize, out: &mut [f64]) {
        if self.d == 1 {
            out[0] = self.node(j);
        } else {
            out[0] = self.node(j / self.m);
            out[1] = self.node(j % self.m);
        }
    }

    pub fn point_vec(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        self.point(j, &mut v);
        v
    }

    /// Whether flat point `j` has an extreme index on some axis.
    #[inline]
    pub fn is_edge(&self, j: usize) -> bool {
        let e = |k: usize| k == 0 || k == self.m - 1;
        if self.d == 1 {
            e(j)
        } else {
            e(j / self.m) || e(j % self.m)
        }
    }

    /// Flat index of the zero velocity.
    pub fn zero_index(&self) -> usize {
        let c = (self.m - 1) / 2;
        if self.d == 1 {
            c
        } else {
            c * self.m + c
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conjugate {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// `false` when the maximiser sits on the edge of the grid, meaning the
    /// truncation radius may be too small.
    pub interior: bool,
}

/// `H*(x, p, u)` by a full scan of `vg`. Ties go to the lowest flat index.
pub fn legendre_transform(
    spec: &HamiltonianSpec,
    x: &[f64],
    u: f64,
    p: &[f64],
    vg: &VelocityGrid,
) -> Result<Conjugate> {
    spec.check_dim(x.len())?;
    if !spec.flags().superlinear_in_p {
        return Err(Error::Precondition(format!(
            "`{}` is not superlinear in p; its Legendre transform may be infinite",
            spec.name()
        )));
    }
    check_dims(x, p, vg)?;
    let mut v = [0.0; 2];
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for j in 0..vg.len() {
        vg.point(j, &mut v);
        let v = &v[..vg.d];
        let h = spec.value(x, v, u);
        if !h.is_finite() {
            return Err(spec.overflow(x, v, u));
        }
        let val = dot(v, p) - h;
        if val > best {
            best = val;
            arg = j;
        }
    }
    if !best.is_finite() {
        return Err(Error::NonFiniteConjugate {
            name: spec.name().to_string(),
            x: x.to_vec(),
            q: p.to_vec(),
            u,
        });
    }
    Ok(Conjugate {
        value: best,
        argmax: vg.point_vec(arg),
        interior: !vg.is_edge(arg),
    })
}

fn check_dims(x: &[f64], p: &[f64], vg: &VelocityGrid) -> Result<()> {
    if x.len() != vg.d || p.len() != vg.d {
        return Err(Error::Precondition(format!(
            "dimension mismatch: x has {}, p has {}, grid has {}",
            x.len(),
            p.len(),
            vg.d
        )));
    }
    Ok(())
}

/// Fast evaluator for `H*` on a fixed momentum grid, used by the solvers.
///
/// For specs convex in `p` the objective `k -> p_k.q - H(x, p_k, u)` is
/// discretely concave along each axis, so the maximiser is found by
/// bisection on forward differences (a scan over the first axis in 2-D).
/// Otherwise it falls back to the full scan. Results agree with
/// [`legendre_transform`] up to rounding on plateaus.
#[derive(Clone, Debug)]
pub struct Conjugator {
    spec: HamiltonianSpec,
    grid: VelocityGrid,
    concave: bool,
}

impl Conjugator {
    pub fn new(spec: &HamiltonianSpec, momenta: VelocityGrid) -> Self {
        Conjugator {
            spec: spec.clone(),
            grid: momenta,
            concave: spec.flags().convex_in_p,
        }
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    /// `(value, flat argmax)`. The value is not checked for finiteness.
    pub fn argmax(&self, x: &[f64], q: &[f64], u: f64) -> (f64, usize) {
        let g = &self.grid;
        let m = g.m;
        if g.d == 1 {
            let f = |k: usize| g.node(k) * q[0] - self.spec.value(x, &[g.node(k)], u);
            if self.concave {
                let k = bisect(m, f);
                (f(k), k)
            } else {
                scan(m, f)
            }
        } else {
            let mut best = (f64::NEG_INFINITY, 0);
            for k0 in 0..m {
                let p0 = g.node(k0);
                let f = |k1: usize| {
                    let p1 = g.node(k1);
                    p0 * q[0] + p1 * q[1] - self.spec.value(x, &[p0, p1], u)
                };
                let (val, k1) = if self.concave {
                    let k1 = bisect(m, f);
                    (f(k1), k1)
                } else {
                    scan(m, f)
                };
                if k0 == 0 || val > best.0 {
                    best = (val, k0 * m + k1);
                }
            }
            best
        }
    }

    /// `H*(x, q, u)`, or an error when it is not finite.
    pub fn value(&self, x: &[f64], q: &[f64], u: f64) -> Result<f64> {
        let (v, _) = self.argmax(x, q, u);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteConjugate {
                name: self.spec.name().to_string(),
                x: x.to_vec(),
                q: q.to_vec(),
                u,
            })
        }
    }
}

/// Smallest maximiser of a discretely concave sequence on `0..m`.
#[inline]
fn bisect(m: usize, f: impl Fn(usize) -> f64) -> usize {
    let (mut lo, mut hi) = (0, m - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if f(mid + 1) <= f(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

#[inline]
fn scan(m: usize, f: impl Fn(usize) -> f64) -> (f64, usize) {
    let mut best = (f(0), 0);
    for k in 1..m {
        let v = f(k);
        if v > best.0 {
            best = (v, k);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiconjugateRow {
    pub p: Vec<f64>,
    pub h: f64,
    pub hstar2: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Biconjugate {
    pub max_deviation: f64,
    pub rows: Vec<BiconjugateRow>,
    /// Conjugations (of either stage) whose maximiser hit the grid edge.
    pub boundary_hits: usize,
}

impl Biconjugate {
    /// Columns `p,H,Hstar2,abs_err` (`p0,p1,...` in 2-D).
    pub fn to_csv(&self) -> String {
        let d = self.rows.first().map_or(1, |r| r.p.len());
        let mut out = String::new();
        out.push_str(if d == 1 { "p,H,Hstar2,abs_err\n" } else { "p0,p1,H,Hstar2,abs_err\n" });
        for r in &self.rows {
            for p in &r.p {
                let _ = write!(out, "{},", fmt12(*p));
            }
            let _ = writeln!(out, "{},{},{}", fmt12(r.h), fmt12(r.hstar2), fmt12(r.abs_err));
        }
        out
    }
}

/// `max_{p in pg} |H**(x, p, u) - H(x, p, u)|` where both conjugations run
/// over the nodes of `vg`.
pub fn biconjugate_check(
    spec: &HamiltonianSpec,
    x: &[f64],
    u: f64,
    vg: &VelocityGrid,
    pg: &VelocityGrid,
) -> Result<Biconjugate> {
    if !spec.flags().convex_in_p {
        return Err(Error::Precondition(format!("`{}` is not convex in p", spec.name())));
    }
    if pg.d != vg.d {
        return Err(Error::Precondition("momentum and velocity grids differ in dimension".into()));
    }
    let mut boundary_hits = 0;
    let mut q = vec![0.0; vg.d];
    let mut hstar = Vec::with_capacity(vg.len());
    for j in 0..vg.len() {
        vg.point(j, &mut q);
        let c = legendre_transform(spec, x, u, &q, vg)?;
        boundary_hits += usize::from(!c.interior);
        hstar.push(c.value);
    }

    let mut rows = Vec::with_capacity(pg.len());
    let mut max_deviation: f64 = 0.0;
    for i in 0..pg.len() {
        let p = pg.point_vec(i);
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (j, hs) in hstar.iter().enumerate() {
            vg.point(j, &mut q);
            let val = dot(&q, &p) - hs;
            if val > best {
                best = val;
                arg = j;
            }
        }
        boundary_hits += usize::from(vg.is_edge(arg));
        let h = spec.value(x, &p, u);
        if !h.is_finite() {
            return Err(spec.overflow(x, &p, u));
        }
        let abs_err = (best - h).abs();
        max_deviation = max_deviation.max(abs_err);
        rows.push(BiconjugateRow {
            p,
            h,
            hstar2: best,
            abs_err,
        });
    }
    Ok(Biconjugate {
        max_deviation,
        rows,
        boundary_hits,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn vg(v_max: f64, m: usize) -> VelocityGrid {
        VelocityGrid::new(v_max, m, 1).unwrap()
    }

    #[test]
    fn velocity_grid_contains_zero_and_is_symmetric() {
        let g = vg(4.0, 401);
        assert_eq!(g.node(200), 0.0);
        assert_eq!(g.spacing(), 0.02);
        for k in 0..401 {
            assert_eq!(g.node(k), -g.node(400 - k));
        }
        assert!(VelocityGrid::new(1.0, 4, 1).is_err());
        assert!(VelocityGrid::new(0.0, 5, 1).is_err());
    }

    #[test]
    fn quadratic_is_self_dual() {
        let c = legendre_transform(&catalog::quadratic(), &[0.0], 0.0, &[1.0], &vg(4.0, 401)).unwrap();
        assert!((c.value - 0.5).abs() < 1e-12);
        assert!((c.argmax[0] - 1.0).abs() < 1e-12);
        assert!(c.interior);
    }

    #[test]
    fn discount_at_zero_momentum() {
        let c = legendre_transform(&catalog::discount(1.0), &[0.0], 2.0, &[0.0], &vg(4.0, 401)).unwrap();
        assert_eq!(c.value, -2.0);
        assert_eq!(c.argmax, vec![0.0]);
    }

    #[test]
    fn zero_momentum_gives_minus_min() {
        let h = catalog::quadratic_potential();
        let x = [1.3];
        let c = legendre_transform(&h, &x, 0.0, &[0.0], &vg(3.0, 61)).unwrap();
        assert!((c.value + (1.0 - 1.3f64.cos())).abs() < 1e-15);
    }

    #[test]
    fn truncated_maximiser_is_flagged() {
        let c = legendre_transform(&catalog::quadratic(), &[0.0], 0.0, &[5.0], &vg(2.0, 41)).unwrap();
        assert!(!c.interior);
        assert_eq!(c.argmax, vec![2.0]);
    }

    #[test]
    fn non_superlinear_is_rejected() {
        let h = catalog::eikonal_sine(1.0);
        assert!(matches!(
            legendre_transform(&h, &[0.0], 0.0, &[0.0], &vg(2.0, 41)),
            Err(Error::Precondition(_))
        ));
        let abs = HamiltonianSpec::new("abs", |_, p, _| p[0].abs()).convex();
        assert!(matches!(
            biconjugate_check(&abs, &[0.0], 0.0, &vg(8.0, 801), &vg(2.0, 201)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn biconjugate_of_quadratic() {
        let r = biconjugate_check(&catalog::quadratic(), &[0.0], 0.0, &vg(8.0, 801), &vg(2.0, 201)).unwrap();
        assert!(r.max_deviation <= 1e-3, "{}", r.max_deviation);
        assert_eq!(r.rows.len(), 201);
        assert!(r.to_csv().starts_with("p,H,Hstar2,abs_err\n-2,2,2,0\n"));
    }

    #[test]
    fn biconjugate_ignores_additive_u() {
        let base = biconjugate_check(&catalog::quadratic(), &[0.0], 0.0, &vg(8.0, 801), &vg(2.0, 101)).unwrap();
        let disc = biconjugate_check(&catalog::discount(1.0), &[0.0], 5.0, &vg(8.0, 801), &vg(2.0, 101)).unwrap();
        assert!(disc.max_deviation <= 1e-3);
        assert!((disc.max_deviation - base.max_deviation).abs() < 1e-12);
    }

    #[test]
    fn conjugator_matches_scan() {
        let pg = vg(6.0, 601);
        for h in [catalog::quadratic_potential(), catalog::contact(0.7), catalog::discount(-1.0)] {
            let conj = Conjugator::new(&h, pg);
            for &(x, q, u) in &[(0.3, 0.0, 1.0), (-2.0, 2.7, -0.5), (1.0, -5.9, 3.0), (0.0, 7.0, 0.0)] {
                let scan = legendre_transform(&h, &[x], u, &[q], &pg).unwrap();
                let (fast, k) = conj.argmax(&[x], &[q], u);
                assert!((fast - scan.value).abs() <= 1e-12, "{} {x} {q} {u}", h.name());
                assert_eq!(pg.node(k), scan.argmax[0]);
            }
        }
    }

    #[test]
    fn conjugator_matches_scan_in_2d() {
        let pg = VelocityGrid::new(3.0, 31, 2).unwrap();
        let h = catalog::contact(1.0);
        let conj = Conjugator::new(&h, pg);
        for &(x, q, u) in &[([0.3, -1.0], [0.0, 0.0], 1.0), ([2.0, 0.5], [1.3, -2.2], -0.5)] {
            let scan = legendre_transform(&h, &x, u, &q, &pg).unwrap();
            let (fast, k) = conj.argmax(&x, &q, u);
            assert!((fast - scan.value).abs() <= 1e-12);
            assert_eq!(pg.point_vec(k), scan.argmax);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn superlinear_spec() -> impl Strategy<Value = HamiltonianSpec> {
            prop::sample::select(vec![0usize, 1, 2, 3, 4, 5, 6]).prop_map(|k| catalog::builtin_catalog()[k].clone())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn conjugate_is_bounded_below(spec in superlinear_spec(), x in -2.0f64..2.0, u in -1.0f64..1.0, q in -3.0f64..3.0) {
                let c = legendre_transform(&spec, &[x], u, &[q], &vg(8.0, 801)).unwrap();
                prop_assert!(c.value >= -spec.value(&[x], &[0.0], u) - 1e-12);
            }

            #[test]
            fn conjugate_is_midpoint_convex(spec in superlinear_spec(), x in -2.0f64..2.0, u in -1.0f64..1.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let g = vg(8.0, 801);
                let at = |q: f64| legendre_transform(&spec, &[x], u, &[q], &g).unwrap().value;
                prop_assert!(at(0.5 * (a + b)) <= 0.5 * (at(a) + at(b)) + 1e-9);
            }

            #[test]
            fn refining_the_momentum_grid_never_lowers_the_conjugate(spec in superlinear_spec(), x in -2.0f64..2.0, u in -1.0f64..1.0, q in -3.0f64..3.0) {
                let coarse = legendre_transform(&spec, &[x], u, &[q], &vg(8.0, 401)).unwrap().value;
                let fine = legendre_transform(&spec, &[x], u, &[q], &vg(8.0, 801)).unwrap().value;
                prop_assert!(fine >= coarse);
            }
        }
    }
}
