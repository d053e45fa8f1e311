//! The semi-Lagrangian inf-convolution step.
//!
//! `u+(x_i) = min_j { I[u](x_i - dt q_j) + dt H*(x_i, q_j, I[w](x_i - dt q_j)) }`
//! where `I` is linear (bilinear) interpolation, `q_j` runs over the outer
//! velocity grid and `w` supplies the value argument of `H*` (`w = u` for a
//! plain step).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{is_big, Boundary, GridSpec, BIG};
use crate::hamiltonian::{HamiltonianSpec, UStructure};
use crate::transform::{Conjugator, VelocityGrid};

use super::SemigroupConfig;

/// Interpolation weights this close to 0 or 1 are snapped.
const SNAP: f64 = 1e-9;
const CHUNK: usize = 64;

/// Where velocity `q_j` sends a node, in index units: the foot sits at
/// `i + base + theta` along each axis, `0 <= theta < 1`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Move {
    pub q: [f64; 2],
    pub base: [isize; 2],
    pub theta: [f64; 2],
    pub allowed: bool,
}

impl Move {
    pub fn is_node_to_node(&self) -> bool {
        self.theta == [0.0, 0.0]
    }
}

pub(crate) fn moves(grid: &GridSpec, dt: f64, vel: &VelocityGrid, radius: Option<usize>) -> Vec<Move> {
    let h = grid.spacing();
    let d = grid.dim();
    (0..vel.len())
        .map(|j| {
            let mut mv = Move {
                q: [0.0; 2],
                base: [0; 2],
                theta: [0.0; 2],
                allowed: true,
            };
            vel.point(j, &mut mv.q);
            for a in 0..d {
                let shift = -dt * mv.q[a] / h;
                let mut fl = shift.floor();
                let mut th = shift - fl;
                if th < SNAP {
                    th = 0.0;
                } else if th > 1.0 - SNAP {
                    th = 0.0;
                    fl += 1.0;
                }
                mv.base[a] = fl as isize;
                mv.theta[a] = th;
                if let Some(r) = radius {
                    mv.allowed &= shift.abs() <= r as f64 + SNAP;
                }
            }
            mv
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Stencil {
    nodes: [usize; 4],
    weights: [f64; 4],
    len: usize,
}

impl Stencil {
    #[inline]
    fn apply(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len {
            let v = values[self.nodes[k]];
            if is_big(v) {
                return BIG;
            }
            acc += self.weights[k] * v;
        }
        acc
    }
}

enum HStar {
    /// `H*(x_i, q_j, w) = table[i * m + j] - slope * w`.
    Table { table: Vec<f64>, slope: f64 },
    Direct(Conjugator),
}

pub(crate) struct Kernel {
    grid: GridSpec,
    dt: f64,
    vel: VelocityGrid,
    moves: Vec<Move>,
    hstar: HStar,
    refine: bool,
    spec_name: String,
    /// Table entries whose momentum maximiser hit the momentum-grid edge.
    pub momentum_edge_hits: usize,
}

pub(crate) struct StepStats {
    pub truncation_hits: usize,
}

impl Kernel {
    pub fn new(spec: &HamiltonianSpec, grid: &GridSpec, cfg: &SemigroupConfig) -> Result<Kernel> {
        super::check_admissible(spec)?;
        spec.check_dim(grid.dim())?;
        cfg.validate(grid)?;
        let vel = cfg.velocities;
        let moves = moves(grid, cfg.dt, &vel, cfg.search_radius);
        let conj = Conjugator::new(spec, cfg.momenta);
        let (hstar, momentum_edge_hits) = match spec.u_structure() {
            UStructure::General => (HStar::Direct(conj), 0),
            UStructure::Independent => {
                let (table, hits) = build_table(&conj, grid, &vel, spec)?;
                (HStar::Table { table, slope: 0.0 }, hits)
            }
            UStructure::Affine { slope } => {
                let (table, hits) = build_table(&conj, grid, &vel, spec)?;
                (HStar::Table { table, slope }, hits)
            }
        };
        Ok(Kernel {
            grid: *grid,
            dt: cfg.dt,
            vel,
            moves,
            hstar,
            refine: cfg.refine,
            spec_name: spec.name().to_string(),
            momentum_edge_hits,
        })
    }

    /// One step from `u` into `out`, with the `H*` value argument read from
    /// `uarg` (falling back to `u` where `uarg` is the sentinel). `args`
    /// receives the minimising velocity index per node, `u32::MAX` when no
    /// candidate is reachable.
    pub fn step(
        &self,
        u: &[f64],
        uarg: Option<&[f64]>,
        out: &mut [f64],
        args: &mut [u32],
    ) -> Result<StepStats> {
        let results: Vec<Result<usize>> = out
            .par_chunks_mut(CHUNK)
            .zip(args.par_chunks_mut(CHUNK))
            .enumerate()
            .map(|(c, (vals, idx))| {
                let mut hits = 0;
                for k in 0..vals.len() {
                    let i = c * CHUNK + k;
                    let (v, j) = self.node(i, u, uarg)?;
                    vals[k] = v;
                    idx[k] = j;
                    hits += usize::from(j != u32::MAX && self.vel.is_edge(j as usize));
                }
                Ok(hits)
            })
            .collect();
        let mut truncation_hits = 0;
        for r in results {
            truncation_hits += r?;
        }
        Ok(StepStats { truncation_hits })
    }

    fn node(&self, i: usize, u: &[f64], uarg: Option<&[f64]>) -> Result<(f64, u32)> {
        if let (HStar::Table { table, slope }, None, 1, false) = (&self.hstar, uarg, self.grid.dim(), self.refine) {
            return Ok(self.node_line(i, u, table, *slope));
        }
        let mut x = [0.0; 2];
        self.grid.point(i, &mut x);
        let idx = self.grid.unflatten(i);
        let mut best = f64::INFINITY;
        let mut arg = u32::MAX;
        for j in 0..self.moves.len() {
            if let Some(c) = self.cost(i, idx, &x, j, u, uarg)? {
                if c < best {
                    best = c;
                    arg = j as u32;
                }
            }
        }
        if arg == u32::MAX {
            return Ok((BIG, arg));
        }
        if self.refine {
            best = self.refined(i, idx, &x, arg as usize, best, u, uarg)?;
        }
        Ok((best, arg))
    }

    /// [`Self::node`] for a tabulated `H*` on a line with `w = u`; performs
    /// the same floating-point operations in the same order.
    fn node_line(&self, i: usize, u: &[f64], table: &[f64], slope: f64) -> (f64, u32) {
        let n = self.grid.n();
        let periodic = self.grid.boundary() == Boundary::Periodic;
        let row = &table[i * self.moves.len()..(i + 1) * self.moves.len()];
        let mut best = f64::INFINITY;
        let mut arg = u32::MAX;
        for (j, mv) in self.moves.iter().enumerate() {
            if !mv.allowed {
                continue;
            }
            let lo = i as isize + mv.base[0];
            let th = mv.theta[0];
            let (lo, hi) = if periodic {
                let lo = lo.rem_euclid(n as isize) as usize;
                (lo, if lo + 1 == n { 0 } else { lo + 1 })
            } else {
                if lo < 0 || lo as usize >= n || (th > 0.0 && lo as usize + 1 >= n) {
                    continue;
                }
                (lo as usize, lo as usize + 1)
            };
            let a = u[lo];
            if is_big(a) {
                continue;
            }
            let v = if th == 0.0 {
                a
            } else {
                let b = u[hi];
                if is_big(b) {
                    continue;
                }
                (1.0 - th) * a + th * b
            };
            let c = v + self.dt * (row[j] - slope * v);
            if c < best {
                best = c;
                arg = j as u32;
            }
        }
        if arg == u32::MAX {
            (BIG, arg)
        } else {
            (best, arg)
        }
    }

    #[inline]
    fn cost(
        &self,
        i: usize,
        idx: [usize; 2],
        x: &[f64; 2],
        j: usize,
        u: &[f64],
        uarg: Option<&[f64]>,
    ) -> Result<Option<f64>> {
        let mv = &self.moves[j];
        if !mv.allowed {
            return Ok(None);
        }
        let Some(st) = self.stencil(idx, mv) else {
            return Ok(None);
        };
        let v = st.apply(u);
        if is_big(v) {
            return Ok(None);
        }
        let w = match uarg {
            None => v,
            Some(ua) => {
                let w = st.apply(ua);
                if is_big(w) {
                    v
                } else {
                    w
                }
            }
        };
        let hs = match &self.hstar {
            HStar::Table { table, slope } => table[i * self.moves.len() + j] - slope * w,
            HStar::Direct(conj) => {
                let d = self.grid.dim();
                let (hs, _) = conj.argmax(&x[..d], &mv.q[..d], w);
                if !hs.is_finite() {
                    return Err(Error::NonFiniteConjugate {
                        name: self.spec_name.clone(),
                        x: x[..d].to_vec(),
                        q: mv.q[..d].to_vec(),
                        u: w,
                    });
                }
                hs
            }
        };
        Ok(Some(v + self.dt * hs))
    }

    /// Three-point parabolic refinement along each velocity axis; lowers the
    /// value only, never moves the argmin.
    #[allow(clippy::too_many_arguments)]
    fn refined(
        &self,
        i: usize,
        idx: [usize; 2],
        x: &[f64; 2],
        j: usize,
        c: f64,
        u: &[f64],
        uarg: Option<&[f64]>,
    ) -> Result<f64> {
        let m = self.vel.m();
        let d = self.grid.dim();
        let mut best = c;
        for a in 0..d {
            let stride = if d == 1 || a == 1 { 1 } else { m };
            let k = if d == 1 || a == 1 { j % m } else { j / m };
            if k == 0 || k + 1 == m {
                continue;
            }
            let lo = self.cost(i, idx, x, j - stride, u, uarg)?;
            let hi = self.cost(i, idx, x, j + stride, u, uarg)?;
            if let (Some(lo), Some(hi)) = (lo, hi) {
                let curv = hi - 2.0 * c + lo;
                if curv > 0.0 {
                    let vertex = c - (hi - lo) * (hi - lo) / (8.0 * curv);
                    best = best.min(vertex);
                }
            }
        }
        Ok(best)
    }

    #[inline]
    fn stencil(&self, idx: [usize; 2], mv: &Move) -> Option<Stencil> {
        let n = self.grid.n() as isize;
        let d = self.grid.dim();
        let mut ax = [[(0usize, 1.0f64); 2]; 2];
        let mut cnt = [1usize; 2];
        for a in 0..d {
            let lo = idx[a] as isize + mv.base[a];
            let th = mv.theta[a];
            match self.grid.boundary() {
                Boundary::Periodic => {
                    let lo = lo.rem_euclid(n) as usize;
                    if th == 0.0 {
                        ax[a][0] = (lo, 1.0);
                    } else {
                        ax[a] = [(lo, 1.0 - th), ((lo + 1) % n as usize, th)];
                        cnt[a] = 2;
                    }
                }
                Boundary::Clamped => {
                    if lo < 0 || lo >= n || (th > 0.0 && lo + 1 >= n) {
                        return None;
                    }
                    let lo = lo as usize;
                    if th == 0.0 {
                        ax[a][0] = (lo, 1.0);
                    } else {
                        ax[a] = [(lo, 1.0 - th), (lo + 1, th)];
                        cnt[a] = 2;
                    }
                }
            }
        }
        let mut st = Stencil {
            nodes: [0; 4],
            weights: [0.0; 4],
            len: 0,
        };
        if d == 1 {
            for &(node, w) in &ax[0][..cnt[0]] {
                st.nodes[st.len] = node;
                st.weights[st.len] = w;
                st.len += 1;
            }
        } else {
            let nn = self.grid.n();
            for &(n0, w0) in &ax[0][..cnt[0]] {
                for &(n1, w1) in &ax[1][..cnt[1]] {
                    st.nodes[st.len] = n0 * nn + n1;
                    st.weights[st.len] = w0 * w1;
                    st.len += 1;
                }
            }
        }
        Some(st)
    }
}

fn build_table(
    conj: &Conjugator,
    grid: &GridSpec,
    vel: &VelocityGrid,
    spec: &HamiltonianSpec,
) -> Result<(Vec<f64>, usize)> {
    let m = vel.len();
    let d = grid.dim();
    let mut table = vec![0.0; grid.len() * m];
    let results: Vec<Result<usize>> = table
        .par_chunks_mut(m)
        .enumerate()
        .map(|(i, row)| {
            let mut x = [0.0; 2];
            let mut q = [0.0; 2];
            grid.point(i, &mut x);
            let mut hits = 0;
            for (j, slot) in row.iter_mut().enumerate() {
                vel.point(j, &mut q);
                let (v, k) = conj.argmax(&x[..d], &q[..d], 0.0);
                if !v.is_finite() {
                    return Err(Error::NonFiniteConjugate {
                        name: spec.name().to_string(),
                        x: x[..d].to_vec(),
                        q: q[..d].to_vec(),
                        u: 0.0,
                    });
                }
                hits += usize::from(conj.grid().is_edge(k));
                *slot = v;
            }
            Ok(hits)
        })
        .collect();
    let mut hits = 0;
    for r in results {
        hits += r?;
    }
    Ok((table, hits))
}
