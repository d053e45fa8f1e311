//! The Jacobi bracket
//!
//! `{H, F} = D_xH.D_pF - D_pH.D_xF + (p.D_pF) H_u - (p.D_pH) F_u + F_u H - H_u F`
//!
//! and a sampling scan that classifies a pair as commuting, one-sided or
//! neither.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::fmt12;
use crate::hamiltonian::{eval_gradients, eval_hamiltonian, HamiltonianSpec, DEFAULT_FD_STEP};

pub const DEFAULT_SEED: u64 = 0x5EED;
pub const TOLERANCE_ANALYTIC: f64 = 1e-7;
pub const TOLERANCE_FD: f64 = 1e-4;

/// `{H, F}` at one point. The six terms are grouped so that swapping `H`
/// and `F` negates the result bit for bit.
pub fn jacobi_bracket(
    h: &HamiltonianSpec,
    f: &HamiltonianSpec,
    x: &[f64],
    p: &[f64],
    u: f64,
    fd_step: f64,
) -> Result<f64> {
    bracket_with_gradients(h, f, x, p, u, fd_step).map(|(v, _)| v)
}

/// The bracket and the larger of `|D_xH|_inf`, `|D_xF|_inf`.
fn bracket_with_gradients(
    h: &HamiltonianSpec,
    f: &HamiltonianSpec,
    x: &[f64],
    p: &[f64],
    u: f64,
    fd_step: f64,
) -> Result<(f64, f64)> {
    let gh = eval_gradients(h, x, p, u, fd_step)?;
    let gf = eval_gradients(f, x, p, u, fd_step)?;
    let hv = eval_hamiltonian(h, x, p, u)?;
    let fv = eval_hamiltonian(f, x, p, u)?;
    let t1 = dot(&gh.dx, &gf.dp);
    let t2 = dot(&gh.dp, &gf.dx);
    let t3 = dot(p, &gf.dp) * gh.du;
    let t4 = dot(p, &gh.dp) * gf.du;
    let t5 = gf.du * hv;
    let t6 = gh.du * fv;
    let dx = gh.dx.iter().chain(&gf.dx).fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(((t1 - t2) + (t3 - t4) + (t5 - t6), dx))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ranges for `x`, `p` and `u`; in 2-D the same range applies to each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBox {
    pub d: usize,
    pub x: (f64, f64),
    pub p: (f64, f64),
    pub u: (f64, f64),
}

impl PhaseBox {
    /// Parses `x=lo:hi,p=lo:hi,u=lo:hi` (keys in any order, all required).
    pub fn parse(s: &str, d: usize) -> Result<Self> {
        const WHAT: &str = "phase box";
        if d != 1 && d != 2 {
            return Err(Error::parse(WHAT, format!("dimension must be 1 or 2, got {d}")));
        }
        let mut ranges: [Option<(f64, f64)>; 3] = [None; 3];
        for part in s.split(',') {
            let (key, range) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(WHAT, format!("expected key=lo:hi, got `{part}`")))?;
            let slot = match key.trim() {
                "x" => 0,
                "p" => 1,
                "u" => 2,
                other => return Err(Error::parse(WHAT, format!("unknown key `{other}`"))),
            };
            if ranges[slot].is_some() {
                return Err(Error::parse(WHAT, format!("duplicate key `{}`", key.trim())));
            }
            let (lo, hi) = range
                .split_once(':')
                .ok_or_else(|| Error::parse(WHAT, format!("expected lo:hi, got `{range}`")))?;
            let num = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(WHAT, format!("bad bound `{}`", t.trim())))
            };
            let (lo, hi) = (num(lo)?, num(hi)?);
            if lo > hi {
                return Err(Error::parse(WHAT, format!("empty range {lo}:{hi}")));
            }
            ranges[slot] = Some((lo, hi));
        }
        match ranges {
            [Some(x), Some(p), Some(u)] => Ok(PhaseBox { d, x, p, u }),
            _ => Err(Error::parse(WHAT, "keys x, p and u are all required")),
        }
    }
}

impl fmt::Display for PhaseBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "x={}:{},p={}:{},u={}:{}",
            self.x.0, self.x.1, self.p.0, self.p.1, self.u.0, self.u.1
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Commuting,
    OneSidedLe,
    OneSidedGe,
    None,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Commuting => "commuting",
            Verdict::OneSidedLe => "one_sided_le",
            Verdict::OneSidedGe => "one_sided_ge",
            Verdict::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketSample {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub u: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketReport {
    pub max_abs: f64,
    /// Largest positive value, or 0.
    pub max_pos: f64,
    /// Most negative value, or 0.
    pub min_neg: f64,
    /// `(x, p, u)` where `max_abs` is attained (first in sample order).
    pub arg_extreme: (Vec<f64>, Vec<f64>, f64),
    pub verdict: Verdict,
    pub samples: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Samples where a finite-difference `D_x` exceeded `grad_cap`.
    pub grad_cap_hits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub samples_per_axis: usize,
    /// Defaults to 1e-7 with analytic gradients and 1e-4 otherwise.
    pub tolerance: Option<f64>,
    pub fd_step: f64,
    pub grad_cap: f64,
    pub random_points: usize,
    pub seed: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            samples_per_axis: 11,
            tolerance: None,
            fd_step: DEFAULT_FD_STEP,
            grad_cap: 1e6,
            random_points: 1000,
            seed: DEFAULT_SEED,
        }
    }
}

pub fn bracket_scan(
    h: &HamiltonianSpec,
    f: &HamiltonianSpec,
    phase: &PhaseBox,
    opts: &ScanOptions,
) -> Result<BracketReport> {
    bracket_scan_with_samples(h, f, phase, opts).map(|(r, _)| r)
}

/// Evaluates the bracket on the tensor lattice of `samples_per_axis` points
/// per coordinate plus `random_points` seeded uniform points.
///
/// A one-sided verdict is only issued when both specs are convex and
/// superlinear in `p`, the setting in which the sign of the bracket orders
/// the two semigroup compositions; otherwise a nonzero bracket gives `none`.
pub fn bracket_scan_with_samples(
    h: &HamiltonianSpec,
    f: &HamiltonianSpec,
    phase: &PhaseBox,
    opts: &ScanOptions,
) -> Result<(BracketReport, Vec<BracketSample>)> {
    if opts.samples_per_axis == 0 {
        return Err(Error::Precondition("samples_per_axis must be at least 1".into()));
    }
    let d = phase.d;
    h.check_dim(d)?;
    f.check_dim(d)?;
    let coords = 2 * d + 1;
    let lattice = opts
        .samples_per_axis
        .checked_pow(coords as u32)
        .filter(|&n| n <= 1 << 24)
        .ok_or_else(|| Error::Precondition("bracket lattice too large".into()))?;

    let ranges: Vec<(f64, f64)> = (0..coords)
        .map(|c| {
            if c < d {
                phase.x
            } else if c < 2 * d {
                phase.p
            } else {
                phase.u
            }
        })
        .collect();
    let s = opts.samples_per_axis;
    let axis = |(lo, hi): (f64, f64), k: usize| {
        if s == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * k as f64 / (s - 1) as f64
        }
    };
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(lattice + opts.random_points);
    for flat in 0..lattice {
        let mut rest = flat;
        let mut pt = vec![0.0; coords];
        for c in (0..coords).rev() {
            pt[c] = axis(ranges[c], rest % s);
            rest /= s;
        }
        points.push(pt);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_points {
        points.push(
            ranges
                .iter()
                .map(|&(lo, hi)| if lo < hi { rng.gen_range(lo..hi) } else { lo })
                .collect(),
        );
    }

    let evaluated: Vec<Result<(f64, f64)>> = points
        .par_iter()
        .map(|pt| bracket_with_gradients(h, f, &pt[..d], &pt[d..2 * d], pt[2 * d], opts.fd_step))
        .collect();

    let analytic = h.has_analytic_gradients() && f.has_analytic_gradients();
    let tolerance = opts
        .tolerance
        .unwrap_or(if analytic { TOLERANCE_ANALYTIC } else { TOLERANCE_FD });
    let mut samples = Vec::with_capacity(points.len());
    let (mut max_abs, mut max_pos, mut min_neg) = (0.0f64, 0.0f64, 0.0f64);
    let mut arg = 0;
    let mut grad_cap_hits = 0;
    for (k, (pt, r)) in points.iter().zip(evaluated).enumerate() {
        let (v, dx) = r?;
        if v.abs() > max_abs {
            max_abs = v.abs();
            arg = k;
        }
        max_pos = max_pos.max(v);
        min_neg = min_neg.min(v);
        grad_cap_hits += usize::from(!analytic && dx > opts.grad_cap);
        samples.push(BracketSample {
            x: pt[..d].to_vec(),
            p: pt[d..2 * d].to_vec(),
            u: pt[2 * d],
            value: v,
        });
    }

    let ordered = h.is_admissible() && f.is_admissible();
    let verdict = if max_abs <= tolerance {
        Verdict::Commuting
    } else if ordered && max_pos <= tolerance {
        Verdict::OneSidedLe
    } else if ordered && -min_neg <= tolerance {
        Verdict::OneSidedGe
    } else {
        Verdict::None
    };
    let a = &points[arg];
    let report = BracketReport {
        max_abs,
        max_pos,
        min_neg,
        arg_extreme: (a[..d].to_vec(), a[d..2 * d].to_vec(), a[2 * d]),
        verdict,
        samples: points.len(),
        tolerance,
        seed: opts.seed,
        grad_cap_hits,
    };
    Ok((report, samples))
}

/// Columns `x,p,u,bracket` (`x0,x1,p0,p1,u,bracket` in 2-D).
pub fn samples_to_csv(samples: &[BracketSample]) -> String {
    let d = samples.first().map_or(1, |s| s.x.len());
    let mut out = String::new();
    out.push_str(if d == 1 { "x,p,u,bracket\n" } else { "x0,x1,p0,p1,u,bracket\n" });
    for s in samples {
        for v in s.x.iter().chain(&s.p) {
            let _ = write!(out, "{},", fmt12(*v));
        }
        let _ = writeln!(out, "{},{}", fmt12(s.u), fmt12(s.value));
    }
    out
}
