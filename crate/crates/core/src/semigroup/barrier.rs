use crate::error::Result;
use crate::grid::{Boundary, GridFunction};
use crate::hamiltonian::{eval_hamiltonian, HamiltonianSpec};

/// `C1 = max |H(x, Du0(x), u0(x))|` over nodes, where `Du0` ranges over the
/// central and both one-sided differences on each axis (so kinks count
/// with both of their slopes).
pub fn barrier_constant(spec: &HamiltonianSpec, u0: &GridFunction) -> Result<f64> {
    let g = u0.grid();
    let n = g.n();
    let h = g.spacing();
    let d = g.dim();
    let vals = u0.values();
    let periodic = g.boundary() == Boundary::Periodic;
    let neighbour = |idx: [usize; 2], a: usize, step: isize| -> Option<usize> {
        let k = idx[a] as isize + step;
        let k = if periodic {
            k.rem_euclid(n as isize)
        } else if k < 0 || k >= n as isize {
            return None;
        } else {
            k
        };
        let mut j = idx;
        j[a] = k as usize;
        Some(g.flatten(j))
    };

    let mut c1: f64 = 0.0;
    let mut x = [0.0; 2];
    for i in 0..vals.len() {
        g.point(i, &mut x);
        let idx = g.unflatten(i);
        let mut slopes: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for a in 0..d {
            let lo = neighbour(idx, a, -1);
            let hi = neighbour(idx, a, 1);
            if let Some(lo) = lo {
                slopes[a].push((vals[i] - vals[lo]) / h);
            }
            if let Some(hi) = hi {
                slopes[a].push((vals[hi] - vals[i]) / h);
            }
            if let (Some(lo), Some(hi)) = (lo, hi) {
                slopes[a].push((vals[hi] - vals[lo]) / (2.0 * h));
            }
        }
        if d == 1 {
            for &p in &slopes[0] {
                c1 = c1.max(eval_hamiltonian(spec, &x[..1], &[p], vals[i])?.abs());
            }
        } else {
            for &p0 in &slopes[0] {
                for &p1 in &slopes[1] {
                    c1 = c1.max(eval_hamiltonian(spec, &x, &[p0, p1], vals[i])?.abs());
                }
            }
        }
    }
    Ok(c1)
}

/// The barriers `u0 -+ C1 (e^{Lambda t} - 1) / Lambda` with `Lambda` the
/// `u`-Lipschitz constant (`C1 t` when `Lambda = 0`).
pub fn barrier_bounds(
    spec: &HamiltonianSpec,
    u0: &GridFunction,
    t: f64,
) -> Result<(GridFunction, GridFunction)> {
    let c1 = barrier_constant(spec, u0)?;
    let lambda = spec.u_lipschitz();
    let width = if lambda == 0.0 {
        c1 * t
    } else {
        c1 * (lambda * t).exp_m1() / lambda
    };
    let shifted = |s: f64| GridFunction::new(*u0.grid(), u0.values().iter().map(|v| v + s).collect());
    Ok((shifted(-width)?, shifted(width)?))
}
