use crate::error::{Error, Result};
use crate::grid::{is_big, Boundary};
use crate::hamiltonian::HamiltonianSpec;
use crate::transform::Conjugator;

use super::kernel::moves;
use super::{SemigroupConfig, SpaceTime};

/// A space-time path visiting node `nodes[k]` at level `start_level + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeCurve {
    pub start_level: usize,
    pub nodes: Vec<usize>,
}

/// `max_{a < b} [u(g_b, t_b) - u(g_a, t_a) - sum_{a <= k < b} dt H*(g_{k+1}, v_k, u(g_k, t_k))]`
/// where `v_k` is the minimal-image displacement over `dt`. Non-positive up to
/// rounding for a solution of the scheme whenever every `v_k` is one of its
/// velocities; zero along an optimal curve.
pub fn check_variational_inequality(
    spec: &HamiltonianSpec,
    sol: &SpaceTime,
    curve: &LatticeCurve,
    cfg: &SemigroupConfig,
) -> Result<f64> {
    let g = &sol.grid;
    let d = g.dim();
    if curve.nodes.len() < 2 {
        return Err(Error::CurveOffGrid("a curve needs at least two nodes".into()));
    }
    let last = curve.start_level + curve.nodes.len() - 1;
    if last > sol.steps() {
        return Err(Error::CurveOffGrid(format!(
            "curve reaches level {last}, table has {}",
            sol.steps()
        )));
    }
    if let Some(&bad) = curve.nodes.iter().find(|&&i| i >= g.len()) {
        return Err(Error::CurveOffGrid(format!("node {bad} outside a grid of {}", g.len())));
    }
    let value = |k: usize| sol.levels[curve.start_level + k][curve.nodes[k]];
    if (0..curve.nodes.len()).any(|k| is_big(value(k))) {
        return Err(Error::CurveOffGrid("curve passes through unreachable nodes".into()));
    }

    let conj = Conjugator::new(spec, cfg.momenta);
    let mut base = [0.0; 2];
    let mut arrival = [0.0; 2];
    let mut v = [0.0; 2];
    let mut prefix = vec![0.0; curve.nodes.len()];
    for k in 0..curve.nodes.len() - 1 {
        g.point(curve.nodes[k], &mut base);
        g.point(curve.nodes[k + 1], &mut arrival);
        for a in 0..d {
            v[a] = g.displacement(base[a], arrival[a]) / sol.dt;
        }
        let hs = conj.value(&arrival[..d], &v[..d], value(k))?;
        prefix[k + 1] = prefix[k] + sol.dt * hs;
    }

    let mut worst = f64::NEG_INFINITY;
    for a in 0..curve.nodes.len() {
        for b in a + 1..curve.nodes.len() {
            worst = worst.max(value(b) - value(a) - (prefix[b] - prefix[a]));
        }
    }
    Ok(worst)
}

/// Follows the backpointers of `sol` from `end_node` at the last level down
/// to level 0. Needs a velocity grid whose steps land on nodes.
pub fn optimal_curve(sol: &SpaceTime, cfg: &SemigroupConfig, end_node: usize) -> Result<LatticeCurve> {
    let back = sol
        .backpointers
        .as_ref()
        .ok_or_else(|| Error::Precondition("table has no backpointers".into()))?;
    let g = &sol.grid;
    if end_node >= g.len() {
        return Err(Error::CurveOffGrid(format!("node {end_node} outside the grid")));
    }
    let mv = moves(g, sol.dt, &cfg.velocities, cfg.search_radius);
    let n = g.n() as isize;
    let mut nodes = vec![end_node];
    let mut i = end_node;
    for k in (1..=sol.steps()).rev() {
        let j = back[k][i];
        if j == u32::MAX {
            return Err(Error::CurveOffGrid(format!("node {i} unreachable at level {k}")));
        }
        let m = mv[j as usize];
        if !m.is_node_to_node() {
            return Err(Error::Precondition(
                "optimal curves need a velocity grid commensurate with the lattice".into(),
            ));
        }
        let mut idx = g.unflatten(i);
        for a in 0..g.dim() {
            let k = idx[a] as isize + m.base[a];
            idx[a] = match g.boundary() {
                Boundary::Periodic => k.rem_euclid(n) as usize,
                Boundary::Clamped => k as usize,
            };
        }
        i = g.flatten(idx);
        nodes.push(i);
    }
    nodes.reverse();
    Ok(LatticeCurve {
        start_level: 0,
        nodes,
    })
}
