use crate::error::{Error, Result};
use crate::grid::{is_big, GridFunction, GridSpec, BIG};
use crate::hamiltonian::HamiltonianSpec;

use super::kernel::Kernel;
use super::{check_admissible, step_count, SemigroupConfig, SpaceTime};

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub table: SpaceTime,
    /// Applications of the operator, including the one that confirmed convergence.
    pub sweeps: usize,
    /// Sup-norm change produced by each sweep.
    pub residuals: Vec<f64>,
}

impl FixedPoint {
    /// Sweeps needed to reach the fixed point (the last sweep only confirms it).
    pub fn picard_iterations(&self) -> usize {
        self.sweeps - 1
    }
}

/// Picard iteration of the space-time operator `A`.
///
/// `A[w]` is the dynamic programme over node-to-foot curves whose running
/// cost `H*(x, q, w(foot, tau))` reads the value argument from the previous
/// iterate `w`. The first iterate is `u0` frozen in time; at the fixed point
/// the table coincides with [`super::evolve_table`].
pub fn fixed_point_a(
    spec: &HamiltonianSpec,
    u0: &GridFunction,
    t: f64,
    cfg: &SemigroupConfig,
) -> Result<FixedPoint> {
    check_admissible(spec)?;
    if cfg.dt * spec.u_lipschitz() >= 1.0 {
        return Err(Error::Precondition(format!(
            "dt * u_lipschitz = {} must be below 1 for the fixed point",
            cfg.dt * spec.u_lipschitz()
        )));
    }
    let n = step_count(t, cfg.dt)?;
    let kernel = Kernel::new(spec, u0.grid(), cfg)?;
    let len = u0.values().len();
    let mut prev: Vec<Vec<f64>> = vec![u0.values().to_vec(); n + 1];
    let mut cur: Vec<Vec<f64>> = vec![vec![0.0; len]; n + 1];
    let mut back: Vec<Vec<u32>> = vec![vec![0; len]; n + 1];
    let mut residuals = Vec::new();

    for sweep in 1..=cfg.picard_max_iter {
        cur[0].copy_from_slice(u0.values());
        for k in 1..=n {
            let (done, rest) = cur.split_at_mut(k);
            kernel.step(&done[k - 1], Some(&prev[k - 1]), &mut rest[0], &mut back[k])?;
        }
        let residual = sup_change(&prev, &cur);
        residuals.push(residual);
        std::mem::swap(&mut prev, &mut cur);
        if residual < cfg.picard_tol {
            back[0].clear();
            return Ok(FixedPoint {
                table: SpaceTime {
                    grid: *u0.grid(),
                    dt: cfg.dt,
                    levels: prev,
                    backpointers: Some(back),
                },
                sweeps: sweep,
                residuals,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.picard_max_iter,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}

fn sup_change(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut r: f64 = 0.0;
    for (la, lb) in a.iter().zip(b) {
        for (&x, &y) in la.iter().zip(lb) {
            match (is_big(x), is_big(y)) {
                (true, true) => {}
                (false, false) => r = r.max((x - y).abs()),
                _ => return f64::INFINITY,
            }
        }
    }
    r
}

/// The action `h_{x0, c}(x, t)`: the fixed point started from `c` at node
/// `x0` and the sentinel [`BIG`] elsewhere. Unreachable entries stay `>= BIG / 2`.
pub fn implicit_action(
    spec: &HamiltonianSpec,
    x0: &[f64],
    u0_val: f64,
    t: f64,
    grid: &GridSpec,
    cfg: &SemigroupConfig,
) -> Result<FixedPoint> {
    let node = grid
        .node_at(x0)
        .ok_or_else(|| Error::Precondition(format!("source {x0:?} is not a grid node")))?;
    if !u0_val.is_finite() || is_big(u0_val) {
        return Err(Error::Precondition(format!("source value {u0_val} must be finite and below BIG/2")));
    }
    let mut values = vec![BIG; grid.len()];
    values[node] = u0_val;
    fixed_point_a(spec, &GridFunction::new(*grid, values)?, t, cfg)
}
