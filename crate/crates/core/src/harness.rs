//! End-to-end experiments on the semigroup: commutation of two flows,
//! `S_H(t) = S_{tH}(1)`, the scaling identity for `mu H + lambda F`, and the
//! multi-time solution through the frozen combination `sum t_i H_i`.

use crate::bracket::Verdict;
use crate::error::{Error, Result};
use crate::grid::{Boundary, GridFunction};
use crate::hamiltonian::{combination, scale, HamiltonianSpec};
use crate::semigroup::{check_admissible, evolve, step_count, SemigroupConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CommutationReport {
    pub lambda: f64,
    pub mu: f64,
    pub dt: f64,
    pub sup_abs_defect: f64,
    pub max_signed: f64,
    pub min_signed: f64,
    /// `None` on periodic grids, where every node is compared.
    pub core_radius: Option<f64>,
    pub core_nodes: usize,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// `S_H(lambda) S_F(mu) u0 - S_F(mu) S_H(lambda) u0` on every node.
    pub defect: GridFunction,
}

/// `20 dt (1 + Lambda s) e^{Lambda s}`: first-order splitting error over a
/// total time `s`, amplified by the Gronwall factor of the `u`-Lipschitz bound.
pub fn consistency_tolerance(dt: f64, lambda: f64, s: f64) -> f64 {
    20.0 * dt * (1.0 + lambda * s) * (lambda * s).exp()
}

/// Nodes compared after a run of total time `s`. Clamped grids drop the
/// band of width `v_max s` next to the boundary, since nothing travels
/// faster than the largest velocity of the scheme.
fn core(u0: &GridFunction, cfg: &SemigroupConfig, s: f64) -> Result<(Vec<bool>, Option<f64>)> {
    let g = u0.grid();
    match g.boundary() {
        Boundary::Periodic => Ok((vec![true; g.len()], None)),
        Boundary::Clamped => {
            let r = g.half_width() - cfg.velocities.v_max() * s;
            let mask = g.core_mask(r);
            if r < 0.0 || !mask.iter().any(|&b| b) {
                return Err(Error::Precondition(format!(
                    "comparison core is empty: L - v_max * t = {r}"
                )));
            }
            Ok((mask, Some(r)))
        }
    }
}

pub fn commutation_defect(
    h: &HamiltonianSpec,
    f: &HamiltonianSpec,
    u0: &GridFunction,
    lambda: f64,
    mu: f64,
    cfg: &SemigroupConfig,
) -> Result<CommutationReport> {
    check_admissible(h)?;
    check_admissible(f)?;
    step_count(lambda, cfg.dt)?;
    step_count(mu, cfg.dt)?;
    let (mask, core_radius) = core(u0, cfg, lambda + mu)?;

    let hf = evolve(h, &evolve(f, u0, mu, cfg)?, lambda, cfg)?;
    let fh = evolve(f, &evolve(h, u0, lambda, cfg)?, mu, cfg)?;
    let diff: Vec<f64> = hf.values().iter().zip(fh.values()).map(|(a, b)| a - b).collect();

    let (mut max_signed, mut min_signed) = (f64::NEG_INFINITY, f64::INFINITY);
    for (d, _) in diff.iter().zip(&mask).filter(|(_, &m)| m) {
        max_signed = max_signed.max(*d);
        min_signed = min_signed.min(*d);
    }
    let sup_abs_defect = max_signed.abs().max(min_signed.abs());
    let tolerance = consistency_tolerance(cfg.dt, h.u_lipschitz().max(f.u_lipschitz()), lambda + mu);
    let verdict = if sup_abs_defect <= tolerance {
        Verdict::Commuting
    } else if max_signed <= tolerance {
        Verdict::OneSidedLe
    } else if -min_signed <= tolerance {
        Verdict::OneSidedGe
    } else {
        Verdict::None
    };
    Ok(CommutationReport {
        lambda,
        mu,
        dt: cfg.dt,
        sup_abs_defect,
        max_signed,
        min_signed,
        core_radius,
        core_nodes: mask.iter().filter(|&&m| m).count(),
        tolerance,
        verdict,
        defect: GridFunction::new(*u0.grid(), diff)?,
    })
}

/// `|S_H(t) u0 - S_{tH}(1) u0|` over the comparison core. The scaled run uses
/// `dt / t` and velocities stretched by `t`, so both take the same steps.
pub fn reparam_check(h: &HamiltonianSpec, u0: &GridFunction, t: f64, cfg: &SemigroupConfig) -> Result<f64> {
    check_admissible(h)?;
    step_count(t, cfg.dt)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let (mask, _) = core(u0, cfg, t)?;
    let direct = evolve(h, u0, t, cfg)?;
    let scaled = evolve(&scale(h, t), u0, 1.0, &cfg.time_scaled(t)?)?;
    Ok(direct.sup_diff(&scaled, Some(&mask)))
}

/// `|v(t, lambda, mu) - v(t/k, k lambda, k mu)|` over the comparison core,
/// where `v(s, a, b)` evolves `u0` under `b H + a F` for time `s`.
#[allow(clippy::too_many_arguments)]
pub fn scaling_check(
    h: &HamiltonianSpec,
    f: &HamiltonianSpec,
    u0: &GridFunction,
    t: f64,
    lambda: f64,
    mu: f64,
    k: f64,
    cfg: &SemigroupConfig,
) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Precondition(format!("k must be positive, got {k}")));
    }
    if !(lambda >= 0.0 && mu >= 0.0) {
        return Err(Error::Precondition("lambda and mu must be non-negative".into()));
    }
    step_count(t, cfg.dt)?;
    if lambda == 0.0 && mu == 0.0 {
        return Ok(0.0);
    }
    let (mask, _) = core(u0, cfg, t)?;
    let g1 = combination(&[(mu, h), (lambda, f)]);
    let g2 = combination(&[(k * mu, h), (k * lambda, f)]);
    let direct = evolve(&g1, u0, t, cfg)?;
    let scaled = evolve(&g2, u0, t / k, &cfg.time_scaled(k)?)?;
    Ok(direct.sup_diff(&scaled, Some(&mask)))
}

/// `u(x, t_1, ..., t_d)` as the unit-time solution of `U_s + sum t_i H_i = 0`.
pub fn multitime_solve(
    hs: &[HamiltonianSpec],
    ts: &[f64],
    u0: &GridFunction,
    cfg: &SemigroupConfig,
) -> Result<GridFunction> {
    if hs.len() != ts.len() || hs.is_empty() {
        return Err(Error::Precondition(format!(
            "need one time per Hamiltonian, got {} and {}",
            hs.len(),
            ts.len()
        )));
    }
    if let Some(t) = ts.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::Precondition(format!("times must be non-negative, got {t}")));
    }
    if ts.iter().all(|&t| t == 0.0) {
        return Ok(u0.clone());
    }
    let terms: Vec<(f64, &HamiltonianSpec)> = ts.iter().copied().zip(hs).collect();
    let g = combination(&terms);
    check_admissible(&g)?;
    evolve(&g, u0, 1.0, cfg)
}

/// The frozen combination `sum t_i H_i` used by [`multitime_solve`].
pub fn multitime_hamiltonian(hs: &[HamiltonianSpec], ts: &[f64]) -> HamiltonianSpec {
    let terms: Vec<(f64, &HamiltonianSpec)> = ts.iter().copied().zip(hs).collect();
    combination(&terms)
}
