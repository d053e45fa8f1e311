//! Spatial lattices on `[-L, L]^d` and functions sampled on them.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::format::fmt12;

/// Sentinel for "unreachable". Anything `>= BIG / 2` is treated as the sentinel.
pub const BIG: f64 = 1e12;

#[inline]
pub fn is_big(v: f64) -> bool {
    v >= BIG / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Clamped,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "clamped" => Ok(Boundary::Clamped),
            _ => Err(Error::parse("boundary", format!("expected `periodic` or `clamped`, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Clamped => "clamped",
        })
    }
}

/// A tensor lattice with `n` nodes per axis. Periodic grids omit the node at
/// `+L` (it coincides with `-L`); clamped grids include both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    d: usize,
    half_width: f64,
    n: usize,
    boundary: Boundary,
}

impl GridSpec {
    pub fn new(d: usize, half_width: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::Precondition(format!("grid dimension must be 1 or 2, got {d}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Precondition(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if n < 3 {
            return Err(Error::Precondition(format!("grid needs at least 3 nodes per axis, got {n}")));
        }
        if n.checked_pow(d as u32).is_none_or(|len| len > 1 << 24) {
            return Err(Error::Precondition(format!("grid with {n}^{d} nodes is too large")));
        }
        Ok(GridSpec {
            d,
            half_width,
            n,
            boundary,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Total node count `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => 2.0 * self.half_width / self.n as f64,
            Boundary::Clamped => 2.0 * self.half_width / (self.n - 1) as f64,
        }
    }

    /// Coordinate of node `k` along any axis.
    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.spacing()
    }

    /// Per-axis indices of flat node `i` (`i = i0 * n + i1` in 2-D).
    #[inline]
    pub fn unflatten(&self, i: usize) -> [usize; 2] {
        if self.d == 1 {
            [i, 0]
        } else {
            [i / self.n, i % self.n]
        }
    }

    #[inline]
    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        if self.d == 1 {
            idx[0]
        } else {
            idx[0] * self.n + idx[1]
        }
    }

    /// Writes the coordinates of flat node `i` into `out[..d]`.
    #[inline]
    pub fn point(&self, i: usize, out: &mut [f64]) {
        let idx = self.unflatten(i);
        for a in 0..self.d {
            out[a] = self.coord(idx[a]);
        }
    }

    pub fn point_vec(&self, i: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.d];
        self.point(i, &mut p);
        p
    }

    /// Signed displacement `b - a` along one axis, reduced to the minimal
    /// image `[-L, L)` on periodic grids.
    pub fn displacement(&self, a: f64, b: f64) -> f64 {
        let d = b - a;
        match self.boundary {
            Boundary::Clamped => d,
            Boundary::Periodic => {
                let w = 2.0 * self.half_width;
                d - w * ((d + self.half_width) / w).floor()
            }
        }
    }

    /// The flat index of the node at `x`, if `x` is a node to within `1e-9 h`.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.d {
            return None;
        }
        let h = self.spacing();
        let mut idx = [0usize; 2];
        for a in 0..self.d {
            let s = (x[a] + self.half_width) / h;
            let k = s.round();
            if (s - k).abs() > 1e-9 || k < 0.0 || k >= self.n as f64 {
                return None;
            }
            idx[a] = k as usize;
        }
        Some(self.flatten(idx))
    }

    /// Nodes with `max_a |x_a| <= radius`.
    pub fn core_mask(&self, radius: f64) -> Vec<bool> {
        let mut p = [0.0; 2];
        (0..self.len())
            .map(|i| {
                self.point(i, &mut p);
                p[..self.d].iter().all(|x| x.abs() <= radius + 1e-12)
            })
            .collect()
    }
}

/// Values on every node of a grid, plus the largest adjacent-node slope.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: GridSpec,
    values: Vec<f64>,
    lip_estimate: f64,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        let lip_estimate = lipschitz(&grid, &values);
        Ok(GridFunction {
            grid,
            values,
            lip_estimate,
        })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut p = [0.0; 2];
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut p);
                f(&p[..grid.dim()])
            })
            .collect();
        GridFunction::new(grid, values)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        GridFunction::new(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Largest `|u(a) - u(b)| / h` over adjacent non-sentinel node pairs.
    pub fn lip_estimate(&self) -> f64 {
        self.lip_estimate
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().filter(|v| !is_big(*v)).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().filter(|v| !is_big(*v)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sup |self - other|`, restricted to `mask` when given.
    pub fn sup_diff(&self, other: &GridFunction, mask: Option<&[bool]>) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Linear (bilinear in 2-D) interpolation at an arbitrary point. Periodic
    /// grids wrap; clamped grids return `None` outside `[-L, L]^d`.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let g = &self.grid;
        let h = g.spacing();
        let n = g.n();
        let mut lo = [0usize; 2];
        let mut hi = [0usize; 2];
        let mut th = [0.0; 2];
        for a in 0..g.dim() {
            let mut s = (x[a] + g.half_width()) / h;
            match g.boundary() {
                Boundary::Periodic => {
                    s = s.rem_euclid(n as f64);
                    let f = s.floor();
                    lo[a] = (f as usize).min(n - 1);
                    hi[a] = (lo[a] + 1) % n;
                    th[a] = s - f;
                }
                Boundary::Clamped => {
                    if !(s >= -1e-9 && s <= (n - 1) as f64 + 1e-9) {
                        return None;
                    }
                    let s = s.clamp(0.0, (n - 1) as f64);
                    let f = s.floor().min((n - 2) as f64);
                    lo[a] = f as usize;
                    hi[a] = lo[a] + 1;
                    th[a] = s - f;
                }
            }
        }
        let v = &self.values;
        Some(if g.dim() == 1 {
            (1.0 - th[0]) * v[lo[0]] + th[0] * v[hi[0]]
        } else {
            let at = |i0: usize, i1: usize| v[i0 * n + i1];
            (1.0 - th[0]) * ((1.0 - th[1]) * at(lo[0], lo[1]) + th[1] * at(lo[0], hi[1]))
                + th[0] * ((1.0 - th[1]) * at(hi[0], lo[1]) + th[1] * at(hi[0], hi[1]))
        })
    }

    /// CSV with header `x,u` or `x0,x1,u`, one row per node in index order.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::with_capacity(32 * g.len());
        out.push_str(if g.dim() == 1 { "x,u\n" } else { "x0,x1,u\n" });
        let mut p = [0.0; 2];
        for (i, v) in self.values.iter().enumerate() {
            g.point(i, &mut p);
            for x in &p[..g.dim()] {
                let _ = write!(out, "{},", fmt12(*x));
            }
            let _ = writeln!(out, "{}", fmt12(*v));
        }
        out
    }

    /// Reads a CSV written by [`GridFunction::to_csv`], checking that every
    /// row sits on the expected node of `grid`.
    pub fn from_csv(grid: GridSpec, text: &str) -> Result<Self> {
        let what = "grid function csv";
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::parse(what, "empty input"))?;
        let expected = if grid.dim() == 1 { "x,u" } else { "x0,x1,u" };
        if header.trim() != expected {
            return Err(Error::parse(
                what,
                format!("header must be `{expected}`, got `{}`", header.trim()),
            ));
        }
        let tol = 1e-9 * grid.half_width().max(1.0);
        let mut values = Vec::with_capacity(grid.len());
        let mut p = [0.0; 2];
        for (row, line) in lines.enumerate() {
            if row >= grid.len() {
                return Err(Error::parse(what, format!("more than {} rows", grid.len())));
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != grid.dim() + 1 {
                return Err(Error::parse(
                    what,
                    format!("row {}: expected {} fields", row + 1, grid.dim() + 1),
                ));
            }
            let nums = fields
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(what, format!("row {}: {e}", row + 1)))?;
            grid.point(row, &mut p);
            for a in 0..grid.dim() {
                if !((nums[a] - p[a]).abs() <= tol) {
                    return Err(Error::parse(
                        what,
                        format!("row {}: coordinate {} is not node {}", row + 1, nums[a], p[a]),
                    ));
                }
            }
            values.push(nums[grid.dim()]);
        }
        if values.len() != grid.len() {
            return Err(Error::parse(
                what,
                format!("expected {} rows, got {}", grid.len(), values.len()),
            ));
        }
        GridFunction::new(grid, values).map_err(|e| Error::parse(what, e.to_string()))
    }
}

fn lipschitz(grid: &GridSpec, values: &[f64]) -> f64 {
    let n = grid.n();
    let h = grid.spacing();
    let periodic = grid.boundary() == Boundary::Periodic;
    let mut lip: f64 = 0.0;
    for i in 0..values.len() {
        let idx = grid.unflatten(i);
        for a in 0..grid.dim() {
            let next = if idx[a] + 1 < n {
                idx[a] + 1
            } else if periodic {
                0
            } else {
                continue;
            };
            let mut j = idx;
            j[a] = next;
            let (u, v) = (values[i], values[grid.flatten(j)]);
            if !is_big(u) && !is_big(v) {
                lip = lip.max((u - v).abs() / h);
            }
        }
    }
    lip
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, b: Boundary) -> GridSpec {
        GridSpec::new(1, 4.0, n, b).unwrap()
    }

    #[test]
    fn spacing_and_coordinates() {
        let c = line(201, Boundary::Clamped);
        assert_eq!(c.spacing(), 0.04);
        assert_eq!(c.coord(0), -4.0);
        assert!((c.coord(200) - 4.0).abs() < 1e-12);
        let p = line(200, Boundary::Periodic);
        assert_eq!(p.spacing(), 0.04);
        assert!((p.coord(199) - 3.96).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(1, 4.0, 2, Boundary::Clamped).is_err());
        assert!(GridSpec::new(3, 4.0, 10, Boundary::Clamped).is_err());
        assert!(GridSpec::new(1, 0.0, 10, Boundary::Clamped).is_err());
        assert!(GridSpec::new(1, f64::NAN, 10, Boundary::Clamped).is_err());
    }

    #[test]
    fn lip_estimate_of_abs() {
        let f = GridFunction::from_fn(line(201, Boundary::Clamped), |x| x[0].abs()).unwrap();
        assert!((f.lip_estimate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lip_estimate_skips_sentinels() {
        let g = line(5, Boundary::Clamped);
        let f = GridFunction::new(g, vec![BIG, BIG, 0.0, BIG, BIG]).unwrap();
        assert_eq!(f.lip_estimate(), 0.0);
    }

    #[test]
    fn periodic_minimal_image() {
        let g = line(200, Boundary::Periodic);
        assert!((g.displacement(3.9, -3.9) - 0.2).abs() < 1e-12);
        assert!((g.displacement(-3.9, 3.9) + 0.2).abs() < 1e-12);
        assert_eq!(g.displacement(0.0, 1.0), 1.0);
    }

    #[test]
    fn node_lookup() {
        let g = GridSpec::new(2, 1.0, 5, Boundary::Clamped).unwrap();
        assert_eq!(g.node_at(&[-1.0, 0.5]), Some(3));
        assert_eq!(g.node_at(&[0.1, 0.0]), None);
        assert_eq!(g.node_at(&[2.0, 0.0]), None);
    }

    #[test]
    fn csv_round_trip_1d_and_2d() {
        let g = line(11, Boundary::Clamped);
        let f = GridFunction::from_fn(g, |x| (x[0] / 3.0).sin()).unwrap();
        let back = GridFunction::from_csv(g, &f.to_csv()).unwrap();
        assert!(f.sup_diff(&back, None) < 1e-11);

        let g2 = GridSpec::new(2, 3.0, 6, Boundary::Periodic).unwrap();
        let f2 = GridFunction::from_fn(g2, |x| x[0] - 2.0 * x[1]).unwrap();
        let text = f2.to_csv();
        assert!(text.starts_with("x0,x1,u\n-3,-3,3\n"));
        let back2 = GridFunction::from_csv(g2, &text).unwrap();
        assert!(f2.sup_diff(&back2, None) < 1e-11);
    }

    #[test]
    fn csv_rejects_mismatched_rows() {
        let g = line(3, Boundary::Clamped);
        assert!(GridFunction::from_csv(g, "x,u\n-4,0\n0,0\n").is_err());
        assert!(GridFunction::from_csv(g, "x,u\n-4,0\n0.5,0\n4,0\n").is_err());
        assert!(GridFunction::from_csv(g, "x,v\n-4,0\n0,0\n4,0\n").is_err());
        assert!(GridFunction::from_csv(g, "x,u\n-4,0\n0,nan\n4,0\n").is_err());
        assert!(GridFunction::from_csv(g, "x,u\n-4,0\n0,1\n4,2\n").is_ok());
    }

    #[test]
    fn interpolation() {
        let g = line(9, Boundary::Clamped);
        let f = GridFunction::from_fn(g, |x| 2.0 * x[0] + 1.0).unwrap();
        assert!((f.interpolate(&[0.3]).unwrap() - 1.6).abs() < 1e-12);
        assert_eq!(f.interpolate(&[4.0]), Some(9.0));
        assert_eq!(f.interpolate(&[4.5]), None);
        let p = GridSpec::new(1, 1.0, 4, Boundary::Periodic).unwrap();
        let fp = GridFunction::new(p, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((fp.interpolate(&[0.75]).unwrap() - 1.5).abs() < 1e-12);
        assert!((fp.interpolate(&[2.75]).unwrap() - 1.5).abs() < 1e-12);
    }
}
