//! Discrete contact Lax-Oleinik semigroup.
//!
//! Each step is the inf-convolution of [`kernel`] with the value argument of
//! `H*` taken at the foot of the characteristic. [`evolve`] composes steps;
//! [`fixed_point_a`] solves the fully implicit space-time problem by Picard
//! iteration; [`implicit_action`] is the fixed point started from a point
//! source.

mod barrier;
mod fixed_point;
mod kernel;
mod variational;

pub use barrier::{barrier_bounds, barrier_constant};
pub use fixed_point::{fixed_point_a, implicit_action, FixedPoint};
pub use variational::{check_variational_inequality, optimal_curve, LatticeCurve};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::hamiltonian::{eval_gradients, HamiltonianSpec, DEFAULT_FD_STEP};
use crate::transform::VelocityGrid;

use kernel::Kernel;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_PICARD_MAX_ITER: usize = 200;

/// Outer velocity spacing targeted by [`SemigroupConfig::auto`] in 1-D.
const AUTO_VELOCITY_SPACING: f64 = 0.025;
/// Momentum spacing targeted by [`SemigroupConfig::auto`] in 1-D.
const AUTO_MOMENTUM_SPACING: f64 = 0.01;
const AUTO_POINTS_2D_VELOCITY: usize = 31;
const AUTO_POINTS_2D_MOMENTUM: usize = 41;
const MAX_POINTS_1D: usize = 20001;

#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupConfig {
    pub dt: f64,
    /// Candidate velocities `q` of the outer minimisation.
    pub velocities: VelocityGrid,
    /// Momenta `p` of the inner supremum defining `H*`.
    pub momenta: VelocityGrid,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Optional cap on `|dt q| / h` per axis, in nodes.
    pub search_radius: Option<usize>,
    pub refine: bool,
}

impl SemigroupConfig {
    pub fn new(dt: f64, velocities: VelocityGrid, momenta: VelocityGrid) -> Self {
        SemigroupConfig {
            dt,
            velocities,
            momenta,
            picard_tol: DEFAULT_PICARD_TOL,
            picard_max_iter: DEFAULT_PICARD_MAX_ITER,
            search_radius: None,
            refine: false,
        }
    }

    /// Derives both grids from the Hamiltonians and the initial data.
    ///
    /// Momenta of interest lie in `|p| <= lip(u0) + 1`; velocities must reach
    /// `max |D_p H| + 2` over that box, and the momentum grid is widened until
    /// `D_p H` at its edge exceeds the velocity radius, so every outer velocity
    /// has an interior maximiser.
    pub fn auto(specs: &[&HamiltonianSpec], u0: &GridFunction, dt: f64) -> Result<Self> {
        let grid = u0.grid();
        let d = grid.dim();
        for s in specs {
            s.check_dim(d)?;
        }
        let p_box = u0.lip_estimate() + 1.0;
        let (lo, hi) = if u0.min().is_finite() {
            (u0.min() - 1.0, u0.max() + 1.0)
        } else {
            (-1.0, 1.0)
        };
        let us: Vec<f64> = (0..5).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect();
        let stride = (grid.len() / 400).max(1);
        let xs: Vec<Vec<f64>> = (0..grid.len()).step_by(stride).map(|i| grid.point_vec(i)).collect();
        let ps = momentum_samples(d, p_box);

        let mut speed: f64 = 0.0;
        for spec in specs {
            for x in &xs {
                for p in &ps {
                    for &u in &us {
                        let g = eval_gradients(spec, x, p, u, DEFAULT_FD_STEP)?;
                        speed = g.dp.iter().fold(speed, |s, v| s.max(v.abs()));
                    }
                }
            }
        }
        let v_max = ((speed + 2.0) * 4.0).ceil() / 4.0;

        let mut p_max = p_box;
        let mut covered = false;
        for _ in 0..80 {
            if momenta_cover(specs, &xs, &us, d, p_max, v_max)? {
                covered = true;
                break;
            }
            p_max *= 1.25;
        }
        if !covered {
            return Err(Error::Precondition(format!(
                "no momentum radius reaches velocity {v_max}; is the Hamiltonian superlinear?"
            )));
        }
        let p_max = (p_max * 4.0).ceil() / 4.0;

        let (mv, mp) = if d == 1 {
            (
                points_for(v_max, AUTO_VELOCITY_SPACING),
                points_for(p_max, AUTO_MOMENTUM_SPACING),
            )
        } else {
            (AUTO_POINTS_2D_VELOCITY, AUTO_POINTS_2D_MOMENTUM)
        };
        Ok(SemigroupConfig::new(
            dt,
            VelocityGrid::new(v_max, mv, d)?,
            VelocityGrid::new(p_max, mp, d)?,
        ))
    }

    /// The configuration for `s H` run on the time scale `t / s`: the step
    /// shrinks by `s` and the velocities stretch by `s`, so both runs visit
    /// the same feet with the same costs.
    pub fn time_scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Precondition(format!("time scale must be positive, got {s}")));
        }
        let mut out = self.clone();
        out.dt = self.dt / s;
        out.velocities = VelocityGrid::new(
            self.velocities.v_max() * s,
            self.velocities.m(),
            self.velocities.dim(),
        )?;
        Ok(out)
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Precondition(format!("dt must be positive, got {}", self.dt)));
        }
        if self.velocities.dim() != grid.dim() || self.momenta.dim() != grid.dim() {
            return Err(Error::Precondition(
                "velocity and momentum grids must match the grid dimension".into(),
            ));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Precondition("picard_tol must be positive".into()));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::Precondition("picard_max_iter must be at least 1".into()));
        }
        if let Some(r) = self.search_radius {
            let need = (self.velocities.v_max() * self.dt / grid.spacing()).ceil() as usize + 1;
            if r < need {
                return Err(Error::Precondition(format!(
                    "search_radius {r} is below ceil(v_max dt / h) + 1 = {need}"
                )));
            }
        }
        Ok(())
    }
}

fn points_for(radius: f64, spacing: f64) -> usize {
    let half = (radius / spacing).ceil() as usize;
    (2 * half + 1).min(MAX_POINTS_1D)
}

fn momentum_samples(d: usize, p_box: f64) -> Vec<Vec<f64>> {
    let axis = |k: usize, m: usize| -p_box + 2.0 * p_box * k as f64 / (m - 1) as f64;
    if d == 1 {
        (0..41).map(|k| vec![axis(k, 41)]).collect()
    } else {
        (0..11)
            .flat_map(|a| (0..11).map(move |b| vec![axis(a, 11), axis(b, 11)]))
            .collect()
    }
}

fn momenta_cover(
    specs: &[&HamiltonianSpec],
    xs: &[Vec<f64>],
    us: &[f64],
    d: usize,
    p_max: f64,
    v_max: f64,
) -> Result<bool> {
    for spec in specs {
        for x in xs {
            for &u in us {
                for a in 0..d {
                    for sign in [-1.0, 1.0] {
                        let mut p = vec![0.0; d];
                        p[a] = sign * p_max;
                        let g = eval_gradients(spec, x, &p, u, DEFAULT_FD_STEP)?;
                        if sign * g.dp[a] < v_max {
                            return Ok(false);
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

pub(crate) fn check_admissible(spec: &HamiltonianSpec) -> Result<()> {
    if spec.is_admissible() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "`{}` must be convex and superlinear in p for the semigroup",
            spec.name()
        )))
    }
}

/// Number of steps of size `dt` in `t`, requiring `t / dt` integral to 1e-9.
pub fn step_count(t: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("t must be non-negative, got {t}")));
    }
    let r = t / dt;
    let n = r.round();
    if (r - n).abs() > 1e-9 {
        return Err(Error::StepCount { t, dt });
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub steps: usize,
    /// Node updates whose minimising velocity sat on the velocity-grid edge.
    pub truncation_hits: usize,
    /// `H*` table entries whose maximising momentum sat on the momentum-grid edge.
    pub momentum_edge_hits: usize,
}

/// Values on the space-time lattice `grid x {0, dt, ..., K dt}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTime {
    pub grid: GridSpec,
    pub dt: f64,
    pub levels: Vec<Vec<f64>>,
    /// Minimising velocity index per node for levels `1..=K` (index 0 unused).
    pub backpointers: Option<Vec<Vec<u32>>>,
}

impl SpaceTime {
    pub fn steps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> Result<GridFunction> {
        GridFunction::new(self.grid, self.levels[k].clone())
    }

    pub fn last(&self) -> Result<GridFunction> {
        self.level(self.steps())
    }
}

/// One inf-convolution step of size `cfg.dt`.
pub fn lax_oleinik_step(
    spec: &HamiltonianSpec,
    u: &GridFunction,
    cfg: &SemigroupConfig,
) -> Result<(GridFunction, Diagnostics)> {
    let kernel = Kernel::new(spec, u.grid(), cfg)?;
    let mut out = vec![0.0; u.values().len()];
    let mut args = vec![0u32; out.len()];
    let stats = kernel.step(u.values(), None, &mut out, &mut args)?;
    Ok((
        GridFunction::new(*u.grid(), out)?,
        Diagnostics {
            steps: 1,
            truncation_hits: stats.truncation_hits,
            momentum_edge_hits: kernel.momentum_edge_hits,
        },
    ))
}

/// `S_H(t) u0` as `t / dt` composed steps.
pub fn evolve(
    spec: &HamiltonianSpec,
    u0: &GridFunction,
    t: f64,
    cfg: &SemigroupConfig,
) -> Result<GridFunction> {
    evolve_with_diagnostics(spec, u0, t, cfg).map(|(u, _)| u)
}

pub fn evolve_with_diagnostics(
    spec: &HamiltonianSpec,
    u0: &GridFunction,
    t: f64,
    cfg: &SemigroupConfig,
) -> Result<(GridFunction, Diagnostics)> {
    check_admissible(spec)?;
    let n = step_count(t, cfg.dt)?;
    if n == 0 {
        return Ok((u0.clone(), Diagnostics::default()));
    }
    let kernel = Kernel::new(spec, u0.grid(), cfg)?;
    let mut cur = u0.values().to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut args = vec![0u32; cur.len()];
    let mut diag = Diagnostics {
        steps: n,
        truncation_hits: 0,
        momentum_edge_hits: kernel.momentum_edge_hits,
    };
    for _ in 0..n {
        let stats = kernel.step(&cur, None, &mut next, &mut args)?;
        diag.truncation_hits += stats.truncation_hits;
        std::mem::swap(&mut cur, &mut next);
    }
    Ok((GridFunction::new(*u0.grid(), cur)?, diag))
}

/// Every intermediate level of [`evolve`], optionally with the minimising
/// velocity index of each node update.
pub fn evolve_table(
    spec: &HamiltonianSpec,
    u0: &GridFunction,
    t: f64,
    cfg: &SemigroupConfig,
    backpointers: bool,
) -> Result<(SpaceTime, Diagnostics)> {
    check_admissible(spec)?;
    let n = step_count(t, cfg.dt)?;
    let kernel = Kernel::new(spec, u0.grid(), cfg)?;
    let len = u0.values().len();
    let mut levels = Vec::with_capacity(n + 1);
    levels.push(u0.values().to_vec());
    let mut back = backpointers.then(|| vec![Vec::new()]);
    let mut args = vec![0u32; len];
    let mut diag = Diagnostics {
        steps: n,
        truncation_hits: 0,
        momentum_edge_hits: kernel.momentum_edge_hits,
    };
    for k in 0..n {
        let mut next = vec![0.0; len];
        let stats = kernel.step(&levels[k], None, &mut next, &mut args)?;
        diag.truncation_hits += stats.truncation_hits;
        levels.push(next);
        if let Some(b) = back.as_mut() {
            b.push(args.clone());
        }
    }
    Ok((
        SpaceTime {
            grid: *u0.grid(),
            dt: cfg.dt,
            levels,
            backpointers: back,
        },
        diag,
    ))
}

#[cfg(test)]
mod tests;
