//! Brute-force evaluation of the variational principle on tiny 1-D instances.
//!
//! Every piecewise-constant-velocity curve with `K` equal sub-steps ending at
//! `x` is enumerated (depth-first, no merging of states), with cost
//! `u0(y_0) + sum_i (t/K) H*(y_i, v_i, w(y_i, tau_i))` evaluated at the start
//! of each sub-step. The value argument `w` is refined over Picard rounds:
//! round 0 freezes `u0` in time, round `r` uses the round `r - 1` value
//! function, itself computed by the same enumeration.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::{Boundary, GridFunction, GridSpec};
use crate::hamiltonian::HamiltonianSpec;
use crate::transform::{legendre_transform, VelocityGrid};

pub const DEFAULT_BUDGET: u128 = 10_000_000;
pub const DEFAULT_PICARD_ROUNDS: usize = 5;
/// A final round that moves the value by more than this is reported as unconverged.
pub const CONVERGENCE_WARNING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Number of sub-steps `K`.
    pub steps: usize,
    pub velocities: Vec<f64>,
    pub picard_rounds: usize,
    /// Momentum grid for the (full-scan) Legendre transform.
    pub momenta: VelocityGrid,
    pub budget: u128,
}

impl OracleConfig {
    pub fn new(steps: usize, velocities: Vec<f64>, momenta: VelocityGrid) -> Self {
        OracleConfig {
            steps,
            velocities,
            picard_rounds: DEFAULT_PICARD_ROUNDS,
            momenta,
            budget: DEFAULT_BUDGET,
        }
    }

    fn validate(&self) -> Result<u128> {
        if self.steps == 0 {
            return Err(Error::Precondition("K must be at least 1".into()));
        }
        if self.picard_rounds == 0 {
            return Err(Error::Precondition("picard_rounds must be at least 1".into()));
        }
        if !self.velocities.contains(&0.0) {
            return Err(Error::Precondition("velocity choices must contain 0".into()));
        }
        if self.velocities.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("velocity choices must be finite".into()));
        }
        if self.momenta.dim() != 1 {
            return Err(Error::Precondition("the oracle is one-dimensional".into()));
        }
        let size = u32::try_from(self.steps)
            .ok()
            .and_then(|k| (self.velocities.len() as u128).checked_pow(k))
            .unwrap_or(u128::MAX);
        if size > self.budget {
            return Err(Error::EnumerationBudget {
                size,
                budget: self.budget,
            });
        }
        Ok(size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    /// `|V_R - V_{R-1}|` at the query point.
    pub last_change: f64,
    pub converged: bool,
    /// Curves per full enumeration, `|V|^K`.
    pub curves: u128,
}

pub fn brute_force_value(
    spec: &HamiltonianSpec,
    u0: &GridFunction,
    x: f64,
    t: f64,
    ocfg: &OracleConfig,
) -> Result<OracleResult> {
    let curves = ocfg.validate()?;
    let grid = *u0.grid();
    if grid.dim() != 1 {
        return Err(Error::Precondition("the oracle is one-dimensional".into()));
    }
    spec.check_dim(1)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("t must be non-negative, got {t}")));
    }
    let mut e = Enumerator {
        spec,
        u0,
        grid,
        tau: t / ocfg.steps as f64,
        ocfg,
        values: HashMap::new(),
        costs: HashMap::new(),
    };
    let x = e
        .canonical(x)
        .ok_or_else(|| Error::Precondition(format!("x = {x} lies outside the domain")))?;
    if t == 0.0 {
        let v = e.initial(x).expect("x inside the domain");
        return Ok(OracleResult {
            value: v,
            last_change: 0.0,
            converged: true,
            curves,
        });
    }

    let rounds = ocfg.picard_rounds;
    let mut prev = None;
    let mut value = f64::INFINITY;
    for r in 1..=rounds {
        if r + 1 < rounds.max(2) && spec.flags().u_independent {
            continue;
        }
        let v = e.value(r, ocfg.steps, x)?;
        prev = Some(std::mem::replace(&mut value, v));
    }
    let last_change = match prev {
        Some(p) if p.is_finite() => (value - p).abs(),
        _ if spec.flags().u_independent => 0.0,
        _ => f64::INFINITY,
    };
    if !value.is_finite() {
        return Err(Error::Precondition(format!("no admissible curve ends at x = {x}")));
    }
    Ok(OracleResult {
        value,
        last_change,
        converged: last_change <= CONVERGENCE_WARNING,
        curves,
    })
}

struct Enumerator<'a> {
    spec: &'a HamiltonianSpec,
    u0: &'a GridFunction,
    grid: GridSpec,
    tau: f64,
    ocfg: &'a OracleConfig,
    /// Round-`r` value at `(level, position)`.
    values: HashMap<(usize, usize, i64), f64>,
    /// Sub-step cost per `(round, level, position, velocity)`.
    costs: HashMap<(usize, usize, i64, usize), f64>,
}

impl Enumerator<'_> {
    /// Wraps into `[-L, L)` on periodic grids; `None` outside clamped ones.
    fn canonical(&self, y: f64) -> Option<f64> {
        let l = self.grid.half_width();
        match self.grid.boundary() {
            Boundary::Periodic => Some((y + l).rem_euclid(2.0 * l) - l),
            Boundary::Clamped => (y >= -l - 1e-12 && y <= l + 1e-12).then_some(y.clamp(-l, l)),
        }
    }

    fn key(y: f64) -> i64 {
        (y * 1e9).round() as i64
    }

    fn initial(&self, y: f64) -> Option<f64> {
        self.u0.interpolate(&[y])
    }

    /// Value argument of round `r` at `(level, y)`.
    fn w(&mut self, r: usize, level: usize, y: f64) -> Result<f64> {
        if r == 0 || level == 0 {
            Ok(self.initial(y).expect("position inside the domain"))
        } else {
            self.value(r, level, y)
        }
    }

    /// Minimum over all curves of `level` sub-steps ending at `y`, with the
    /// value argument taken from round `r - 1`.
    fn value(&mut self, r: usize, level: usize, y: f64) -> Result<f64> {
        let key = (r, level, Self::key(y));
        if let Some(&v) = self.values.get(&key) {
            return Ok(v);
        }
        let mut best = f64::INFINITY;
        self.descend(r, level, y, 0.0, &mut best)?;
        self.values.insert(key, best);
        Ok(best)
    }

    fn descend(&mut self, r: usize, level: usize, y: f64, acc: f64, best: &mut f64) -> Result<()> {
        if level == 0 {
            let total = acc + self.initial(y).expect("position inside the domain");
            if total < *best {
                *best = total;
            }
            return Ok(());
        }
        for j in 0..self.ocfg.velocities.len() {
            let v = self.ocfg.velocities[j];
            let Some(start) = self.canonical(y - self.tau * v) else {
                continue;
            };
            let c = self.cost(r, level - 1, start, j)?;
            self.descend(r, level - 1, start, acc + c, best)?;
        }
        Ok(())
    }

    fn cost(&mut self, r: usize, level: usize, y: f64, j: usize) -> Result<f64> {
        let key = (r, level, Self::key(y), j);
        if let Some(&c) = self.costs.get(&key) {
            return Ok(c);
        }
        let w = self.w(r - 1, level, y)?;
        let v = self.ocfg.velocities[j];
        let hs = legendre_transform(self.spec, &[y], w, &[v], &self.ocfg.momenta)?.value;
        let c = self.tau * hs;
        self.costs.insert(key, c);
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn momenta() -> VelocityGrid {
        VelocityGrid::new(6.0, 1201, 1).unwrap()
    }

    fn vels(r: i32) -> Vec<f64> {
        (-r..=r).map(f64::from).collect()
    }

    #[test]
    fn abs_at_its_minimum() {
        let g = GridSpec::new(1, 4.0, 41, Boundary::Clamped).unwrap();
        let u0 = GridFunction::from_fn(g, |x| x[0].abs()).unwrap();
        let r = brute_force_value(&catalog::quadratic(), &u0, 0.0, 0.5, &OracleConfig::new(4, vels(2), momenta())).unwrap();
        assert!(r.value.abs() < 1e-12, "{}", r.value);
        assert_eq!(r.curves, 625);
    }

    #[test]
    fn discount_decay_at_coarse_resolution() {
        let g = GridSpec::new(1, 4.0, 41, Boundary::Clamped).unwrap();
        let u0 = GridFunction::constant(g, 1.0).unwrap();
        let mut cfg = OracleConfig::new(8, vels(2), momenta());
        let r = brute_force_value(&catalog::discount(1.0), &u0, 0.0, 0.5, &cfg).unwrap();
        assert!((r.value - (-0.5f64).exp()).abs() <= 0.05, "{}", r.value);
        assert!(!r.converged, "{}", r.last_change);
        cfg.picard_rounds = 9;
        let r = brute_force_value(&catalog::discount(1.0), &u0, 0.0, 0.5, &cfg).unwrap();
        assert!(r.converged, "{}", r.last_change);
    }

    #[test]
    fn short_time_stationary_curve() {
        let g = GridSpec::new(1, 4.0, 41, Boundary::Periodic).unwrap();
        let u0 = GridFunction::constant(g, 0.3).unwrap();
        let h = catalog::contact(1.0);
        let t = 1e-3;
        let r = brute_force_value(&h, &u0, 1.0, t, &OracleConfig::new(1, vels(1), momenta())).unwrap();
        let hs = legendre_transform(&h, &[1.0], 0.3, &[0.0], &momenta()).unwrap().value;
        assert!((r.value - (0.3 + t * hs)).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let g = GridSpec::new(1, 4.0, 41, Boundary::Clamped).unwrap();
        let u0 = GridFunction::constant(g, 0.0).unwrap();
        let cfg = OracleConfig::new(11, vels(2), momenta());
        assert!(matches!(
            brute_force_value(&catalog::quadratic(), &u0, 0.0, 1.0, &cfg),
            Err(Error::EnumerationBudget { size: 48828125, budget: 10_000_000 })
        ));
    }

    #[test]
    fn velocity_list_needs_zero() {
        let g = GridSpec::new(1, 4.0, 41, Boundary::Clamped).unwrap();
        let u0 = GridFunction::constant(g, 0.0).unwrap();
        let cfg = OracleConfig::new(2, vec![-1.0, 1.0], momenta());
        assert!(brute_force_value(&catalog::quadratic(), &u0, 0.0, 1.0, &cfg).is_err());
    }

    #[test]
    fn larger_velocity_sets_never_increase_the_value() {
        let g = GridSpec::new(1, 4.0, 41, Boundary::Periodic).unwrap();
        let u0 = GridFunction::from_fn(g, |x| x[0].sin() + 0.5 * x[0].abs()).unwrap();
        let h = catalog::quadratic_potential();
        for &x in &[-1.5, 0.0, 2.2] {
            let small = brute_force_value(&h, &u0, x, 0.6, &OracleConfig::new(5, vels(1), momenta())).unwrap();
            let mut wide = vels(2);
            wide.push(0.5);
            let big = brute_force_value(&h, &u0, x, 0.6, &OracleConfig::new(5, wide, momenta())).unwrap();
            assert!(big.value <= small.value);
        }
    }
}
