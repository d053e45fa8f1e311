//! The acceptance suite: twelve numerical criteria that each emit CSV
//! artifacts, plus a thirteenth that reruns the first twelve under a
//! different worker count and compares the artifacts byte for byte.

use std::path::Path;

use contact_hj::bracket::{bracket_scan_with_samples, samples_to_csv, BracketSample, PhaseBox, ScanOptions};
use contact_hj::catalog::{self, builtin_catalog};
use contact_hj::format::fmt12;
use contact_hj::harness::{commutation_defect, consistency_tolerance, multitime_solve, reparam_check, scaling_check, CommutationReport};
use contact_hj::hamiltonian::{combination, HamiltonianSpec};
use contact_hj::oracle::{brute_force_value, OracleConfig};
use contact_hj::semigroup::{barrier_bounds, evolve, SemigroupConfig};
use contact_hj::transform::{biconjugate_check, VelocityGrid};
use contact_hj::{Boundary, GridFunction, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Common;
use crate::Failure;

pub const SEED: u64 = 0x5EED;
const L: f64 = 4.0;
const N: usize = 201;
const DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// `(file name, contents)` pairs.
    pub artifacts: Vec<(String, String)>,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

type Res = Result<Outcome, Failure>;

pub fn run_criterion(id: usize) -> Res {
    match id {
        1 => legendre_self_duality(),
        2 => hopf_lax_regression(),
        3 => contact_decay(),
        4 => barrier_containment(),
        5 => monotone_comparison(),
        6 => bracket_values(),
        7 => commuting_pair(),
        8 => one_sided_pair(),
        9 => reparametrization(),
        10 => scaling(),
        11 => multitime(),
        12 => oracle_equivalence(),
        13 => determinism(1, 8),
        _ => Err(Failure::Config(format!("no criterion {id}"))),
    }
}

/// Criteria 1 to 12 inside a pool of `workers` threads.
pub fn run_numerical(workers: usize) -> Result<Vec<Outcome>, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Numerical(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| (1..=12).map(run_criterion).collect())
}

fn artifacts_of(outcomes: &[Outcome]) -> Vec<(String, String)> {
    outcomes.iter().flat_map(|o| o.artifacts.iter().cloned()).collect()
}

/// Criterion 13: reruns criteria 1 to 12 with `workers_b` and compares
/// against artifacts already produced with `workers_a`.
pub fn determinism_against(reference: &[(String, String)], workers_a: usize, workers_b: usize) -> Res {
    let other = artifacts_of(&run_numerical(workers_b)?);
    let differing: Vec<&str> = reference
        .iter()
        .zip(&other)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let passed = reference.len() == other.len() && differing.is_empty();
    Ok(Outcome {
        id: 13,
        name: "determinism",
        passed,
        detail: if passed {
            format!("{} CSV files identical with {workers_a} and {workers_b} workers", reference.len())
        } else {
            format!("differing files with {workers_a} vs {workers_b} workers: {differing:?}")
        },
        artifacts: Vec::new(),
    })
}

pub fn determinism(workers_a: usize, workers_b: usize) -> Res {
    let reference = artifacts_of(&run_numerical(workers_a)?);
    determinism_against(&reference, workers_a, workers_b)
}

/// `selftest`: runs the suite, writes artifacts under `--out` when given,
/// prints the pass/fail table and exits 1 if any criterion failed.
pub fn run_cli(common: &Common) -> Result<i32, Failure> {
    let workers = common.workers.unwrap_or(1);
    let mut outcomes = run_numerical(workers)?;
    let reference = artifacts_of(&outcomes);
    let other = if workers == 8 { 1 } else { 8 };
    outcomes.push(determinism_against(&reference, workers, other)?);
    if let Some(dir) = &common.out {
        write_artifacts(dir, &reference)?;
    }
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    Ok(if failed == 0 { 0 } else { 1 })
}

pub fn write_artifacts(dir: &Path, artifacts: &[(String, String)]) -> Result<(), Failure> {
    for (name, text) in artifacts {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Failure::Numerical(format!("cannot write `{}`: {e}", path.display())))?;
    }
    Ok(())
}

fn line_grid(n: usize, boundary: Boundary) -> Result<GridSpec, Failure> {
    Ok(GridSpec::new(1, L, n, boundary)?)
}

fn resolve(s: &str) -> Result<HamiltonianSpec, Failure> {
    Ok(catalog::resolve(s)?)
}

/// Seeded piecewise-linear data with `knots` equispaced knots across `[-L, L]`.
fn random_piecewise_linear(grid: GridSpec, rng: &mut ChaCha8Rng, knots: usize, lo: f64, hi: f64) -> Result<(Vec<f64>, GridFunction), Failure> {
    let ks: Vec<f64> = (0..knots).map(|_| rng.gen_range(lo..hi)).collect();
    let u = piecewise_linear(grid, &ks)?;
    Ok((ks, u))
}

fn piecewise_linear(grid: GridSpec, knots: &[f64]) -> Result<GridFunction, Failure> {
    let m = (knots.len() - 1) as f64;
    Ok(GridFunction::from_fn(grid, |x| {
        let s = ((x[0] + L) / (2.0 * L) * m).clamp(0.0, m);
        let k = (s.floor() as usize).min(knots.len() - 2);
        let th = s - k as f64;
        (1.0 - th) * knots[k] + th * knots[k + 1]
    })?)
}

fn legendre_self_duality() -> Res {
    let h = catalog::quadratic();
    let vg = VelocityGrid::new(8.0, 801, 1)?;
    let pg = VelocityGrid::new(2.0, 81, 1)?;
    let r = biconjugate_check(&h, &[0.0], 0.0, &vg, &pg)?;
    Ok(Outcome {
        id: 1,
        name: "legendre self-duality",
        passed: r.max_deviation <= 1e-3,
        detail: format!("max |H** - H| = {} (bound 1e-3)", fmt12(r.max_deviation)),
        artifacts: vec![("c01_legendre.csv".into(), r.to_csv())],
    })
}

fn hopf_lax_regression() -> Res {
    let g = line_grid(N, Boundary::Clamped)?;
    let h = catalog::quadratic();
    let u0 = GridFunction::from_fn(g, |x| x[0].abs())?;
    let cfg = SemigroupConfig::auto(&[&h], &u0, DT)?;
    let u = evolve(&h, &u0, 1.0, &cfg)?;
    let exact = |x: f64| if x.abs() >= 1.0 { x.abs() - 0.5 } else { 0.5 * x * x };
    let mut err: f64 = 0.0;
    let mut x = [0.0];
    for (i, v) in u.values().iter().enumerate() {
        g.point(i, &mut x);
        if x[0].abs() <= 2.0 + 1e-12 {
            err = err.max((v - exact(x[0])).abs());
        }
    }
    let bound = 5.0 * g.spacing();
    Ok(Outcome {
        id: 2,
        name: "hopf-lax regression",
        passed: err <= bound,
        detail: format!("max error on |x| <= 2 = {} (bound {})", fmt12(err), fmt12(bound)),
        artifacts: vec![("c02_hopf_lax.csv".into(), u.to_csv())],
    })
}

fn contact_decay() -> Res {
    let g = line_grid(N, Boundary::Clamped)?;
    let h = catalog::discount(1.0);
    let u0 = GridFunction::constant(g, 1.0)?;
    let cfg = SemigroupConfig::auto(&[&h], &u0, DT)?;
    let u = evolve(&h, &u0, 1.0, &cfg)?;
    let target = (-1.0f64).exp();
    let err = u.values().iter().fold(0.0f64, |m, v| m.max((v - target).abs()));
    Ok(Outcome {
        id: 3,
        name: "contact decay",
        passed: err <= 2e-3,
        detail: format!("max |u - 1/e| = {} (bound 2e-3)", fmt12(err)),
        artifacts: vec![("c03_decay.csv".into(), u.to_csv())],
    })
}

fn barrier_containment() -> Res {
    let g = line_grid(N, Boundary::Clamped)?;
    let t = 0.25;
    let specs: Vec<HamiltonianSpec> = builtin_catalog().into_iter().filter(|h| h.is_admissible()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let data: Vec<GridFunction> = (0..10)
        .map(|_| random_piecewise_linear(g, &mut rng, 9, -1.0, 1.0).map(|(_, u)| u))
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("hamiltonian,sample,lower_gap,upper_gap,slack\n");
    let mut worst = f64::INFINITY;
    let mut passed = true;
    for h in &specs {
        for (k, u0) in data.iter().enumerate() {
            let cfg = SemigroupConfig::auto(&[h], u0, DT)?;
            let u = evolve(h, u0, t, &cfg)?;
            let (lo, hi) = barrier_bounds(h, u0, t)?;
            // The scheme's conjugate is a maximum over the momentum grid and
            // its minimisation runs over the velocity grid; each misses the
            // continuum value by at most a spacing squared per unit time.
            let slack = t * (cfg.momenta.spacing().powi(2) + cfg.velocities.spacing().powi(2));
            let (mut lower, mut upper) = (f64::INFINITY, f64::INFINITY);
            for i in 0..g.len() {
                lower = lower.min(u.values()[i] - lo.values()[i]);
                upper = upper.min(hi.values()[i] - u.values()[i]);
            }
            passed &= lower >= -slack && upper >= -slack;
            worst = worst.min(lower.min(upper) + slack);
            csv.push_str(&format!("{},{k},{},{},{}\n", h.name(), fmt12(lower), fmt12(upper), fmt12(slack)));
        }
    }
    Ok(Outcome {
        id: 4,
        name: "barrier containment",
        passed,
        detail: format!(
            "{} hamiltonians x 10 data, smallest margin beyond slack {}",
            specs.len(),
            fmt12(worst)
        ),
        artifacts: vec![("c04_barriers.csv".into(), csv)],
    })
}

fn monotone_comparison() -> Res {
    let g = line_grid(N, Boundary::Clamped)?;
    let t = 0.25;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut csv = String::from("hamiltonian,pair,min_gap\n");
    let mut passed = true;
    let mut worst = f64::INFINITY;
    for pair in 0..20 {
        let (knots, u0) = random_piecewise_linear(g, &mut rng, 9, -1.0, 1.0)?;
        let bumps: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..0.5)).collect();
        let raised: Vec<f64> = knots.iter().zip(&bumps).map(|(a, b)| a + b).collect();
        let v0 = piecewise_linear(g, &raised)?;
        for h in [catalog::discount(1.0), catalog::quadratic()] {
            let cfg = SemigroupConfig::auto(&[&h], &u0, DT)?;
            let u = evolve(&h, &u0, t, &cfg)?;
            let v = evolve(&h, &v0, t, &cfg)?;
            let gap = u.values().iter().zip(v.values()).fold(f64::INFINITY, |m, (a, b)| m.min(b - a));
            passed &= gap >= 0.0;
            worst = worst.min(gap);
            csv.push_str(&format!("{},{pair},{}\n", h.name(), fmt12(gap)));
        }
    }
    Ok(Outcome {
        id: 5,
        name: "monotone comparison",
        passed,
        detail: format!("40 runs, smallest v - u = {}", fmt12(worst)),
        artifacts: vec![("c05_comparison.csv".into(), csv)],
    })
}

fn bracket_values() -> Res {
    let phase = PhaseBox::parse("x=-3:3,p=-3:3,u=-2:2", 1)?;
    let opts = ScanOptions::default();
    let scan = |a: &HamiltonianSpec, b: &HamiltonianSpec| -> Result<Vec<BracketSample>, Failure> {
        if !(a.has_analytic_gradients() && b.has_analytic_gradients()) {
            return Err(Failure::Config(format!("{} or {} lacks analytic gradients", a.name(), b.name())));
        }
        Ok(bracket_scan_with_samples(a, b, &phase, &opts)?.1)
    };
    let dev = |s: &[BracketSample], target: f64| s.iter().fold(0.0f64, |m, b| m.max((b.value - target).abs()));

    let (p1, x1, u) = (resolve("p1")?, resolve("x1")?, resolve("u")?);
    let contact = resolve("contact(alpha=1)")?;
    let contact2 = resolve("scale(k=2,of=contact(alpha=1))")?;
    let px = scan(&p1, &x1)?;
    let hh = scan(&contact, &contact2)?;
    let up = scan(&u, &p1)?;
    let (e_px, e_hh, e_up) = (dev(&px, -1.0), dev(&hh, 0.0), dev(&up, 0.0));

    let mut antisymmetric = true;
    for (a, b) in [(&p1, &x1), (&contact, &contact2), (&u, &p1), (&contact, &x1)] {
        let fwd = scan(a, b)?;
        let back = scan(b, a)?;
        antisymmetric &= fwd.iter().zip(&back).all(|(s, r)| s.value == -r.value);
    }
    Ok(Outcome {
        id: 6,
        name: "bracket exact values",
        passed: e_px <= 1e-9 && e_hh <= 1e-9 && e_up <= 1e-9 && antisymmetric,
        detail: format!(
            "|{{p1,x1}}+1| <= {}, |{{H,2H}}| <= {}, |{{u,p1}}| <= {}, antisymmetry {}",
            fmt12(e_px),
            fmt12(e_hh),
            fmt12(e_up),
            if antisymmetric { "exact" } else { "broken" }
        ),
        artifacts: vec![
            ("c06_bracket_p1_x1.csv".into(), samples_to_csv(&px)),
            ("c06_bracket_contact_2contact.csv".into(), samples_to_csv(&hh)),
        ],
    })
}

fn commute_row(r: &CommutationReport) -> String {
    format!(
        "{},{},{},{},{},{},{}\n",
        fmt12(r.lambda),
        fmt12(r.mu),
        fmt12(r.dt),
        fmt12(r.sup_abs_defect),
        fmt12(r.max_signed),
        fmt12(r.min_signed),
        r.verdict
    )
}

/// Defect reports at `dt` in {2e-3, 1e-3, 5e-4}, coarsest first; each
/// divides `lambda = mu = 0.25`.
fn defect_sweep(h: &HamiltonianSpec, f: &HamiltonianSpec, u0: &GridFunction, lambda: f64, mu: f64) -> Result<Vec<CommutationReport>, Failure> {
    let base = SemigroupConfig::auto(&[h, f], u0, DT)?;
    [2e-3, 1e-3, 5e-4]
        .iter()
        .map(|&dt| {
            let mut cfg = base.clone();
            cfg.dt = dt;
            Ok(commutation_defect(h, f, u0, lambda, mu, &cfg)?)
        })
        .collect()
}

fn commuting_pair() -> Res {
    let g = line_grid(N, Boundary::Clamped)?;
    let h = resolve("contact(alpha=1)")?;
    let f = resolve("scale(k=2,of=contact(alpha=1))")?;
    let u0 = GridFunction::from_fn(g, |x| x[0].cos())?;
    let (lambda, mu) = (0.25, 0.25);
    let reports = defect_sweep(&h, &f, &u0, lambda, mu)?;
    let big_lambda = h.u_lipschitz().max(f.u_lipschitz());
    let fine = &reports[1];
    let tol = consistency_tolerance(fine.dt, big_lambda, lambda + mu);
    let ratios: Vec<f64> = reports.windows(2).map(|w| w[0].sup_abs_defect / w[1].sup_abs_defect).collect();
    let passed = fine.sup_abs_defect <= tol && ratios.iter().all(|&r| r >= 1.5);
    let mut csv = String::from(crate::run::COMMUTE_HEADER);
    reports.iter().for_each(|r| csv.push_str(&commute_row(r)));
    Ok(Outcome {
        id: 7,
        name: "commutation of H and 2H",
        passed,
        detail: format!(
            "sup defect {} at dt=1e-3 (bound {}), halving ratios {} and {} (need >= 1.5)",
            fmt12(fine.sup_abs_defect),
            fmt12(tol),
            fmt12(ratios[0]),
            fmt12(ratios[1])
        ),
        artifacts: vec![("c07_commute.csv".into(), csv)],
    })
}

fn one_sided_pair() -> Res {
    let g = line_grid(N, Boundary::Clamped)?;
    let h = resolve("discount(alpha=1)")?;
    let f = resolve("shift(c=1,of=discount(alpha=1))")?;
    let u0 = GridFunction::from_fn(g, |x| x[0].cos())?;
    let (lambda, mu) = (0.25, 0.25);
    let cfg = SemigroupConfig::auto(&[&h, &f], &u0, DT)?;
    let r = commutation_defect(&h, &f, &u0, lambda, mu, &cfg)?;
    let tol = consistency_tolerance(DT, h.u_lipschitz().max(f.u_lipschitz()), lambda + mu);
    let genuine = -0.05 * lambda * mu;
    let passed = r.max_signed <= tol && r.min_signed <= genuine;
    let mut csv = String::from(crate::run::COMMUTE_HEADER);
    csv.push_str(&commute_row(&r));
    Ok(Outcome {
        id: 8,
        name: "one-sided commutation of H and H+1",
        passed,
        detail: format!(
            "max_signed {} (need <= {}), min_signed {} (need <= {})",
            fmt12(r.max_signed),
            fmt12(tol),
            fmt12(r.min_signed),
            fmt12(genuine)
        ),
        artifacts: vec![("c08_one_sided.csv".into(), csv)],
    })
}

fn reparametrization() -> Res {
    let g = line_grid(N, Boundary::Periodic)?;
    let h = catalog::discount(1.0);
    let u0 = GridFunction::constant(g, 1.0)?;
    let cfg = SemigroupConfig::auto(&[&h], &u0, DT)?;
    let d = reparam_check(&h, &u0, 2.0, &cfg)?;
    Ok(Outcome {
        id: 9,
        name: "reparametrization",
        passed: d <= 5e-3,
        detail: format!("|S_H(2) - S_2H(1)| = {} (bound 5e-3)", fmt12(d)),
        artifacts: vec![("c09_reparam.csv".into(), format!("t,dt,defect\n2,{},{}\n", fmt12(DT), fmt12(d)))],
    })
}

fn periodic_cosine() -> Result<GridFunction, Failure> {
    let g = line_grid(N, Boundary::Periodic)?;
    let w = std::f64::consts::PI / L;
    Ok(GridFunction::from_fn(g, |x| (w * x[0]).cos())?)
}

fn scaling() -> Res {
    let u0 = periodic_cosine()?;
    let h = catalog::quadratic();
    let f = resolve("scale(k=2,of=quadratic)")?;
    let (t, lambda, mu, k) = (0.5, 1.0, 1.0, 2.0);
    let g1 = combination(&[(mu, &h), (lambda, &f)]);
    let cfg = SemigroupConfig::auto(&[&g1], &u0, DT)?;
    let d = scaling_check(&h, &f, &u0, t, lambda, mu, k, &cfg)?;
    let bound = 10.0 * DT;
    Ok(Outcome {
        id: 10,
        name: "scaling",
        passed: d <= bound,
        detail: format!("defect {} (bound {})", fmt12(d), fmt12(bound)),
        artifacts: vec![(
            "c10_scaling.csv".into(),
            format!("t,lambda,mu,k,dt,defect\n0.5,1,1,2,{},{}\n", fmt12(DT), fmt12(d)),
        )],
    })
}

fn multitime() -> Res {
    let u0 = periodic_cosine()?;
    let h1 = catalog::quadratic();
    let h2 = resolve("scale(k=2,of=quadratic)")?;
    let ts = [0.2, 0.4];
    let hs = [h1.clone(), h2];
    let g = contact_hj::harness::multitime_hamiltonian(&hs, &ts);
    let u = multitime_solve(&hs, &ts, &u0, &SemigroupConfig::auto(&[&g], &u0, DT)?)?;
    let direct = evolve(&h1, &u0, 1.0, &SemigroupConfig::auto(&[&h1], &u0, DT)?)?;
    let d = u.sup_diff(&direct, None);
    let bound = 20.0 * DT;
    Ok(Outcome {
        id: 11,
        name: "multi-time",
        passed: d <= bound,
        detail: format!("|u(0.2, 0.4) - S_H1(1)| = {} (bound {})", fmt12(d), fmt12(bound)),
        artifacts: vec![("c11_multitime.csv".into(), u.to_csv())],
    })
}

fn oracle_equivalence() -> Res {
    let g = line_grid(41, Boundary::Clamped)?;
    let h = catalog::discount(1.0);
    let u0 = GridFunction::from_fn(g, |x| x[0].cos())?;
    let cfg = SemigroupConfig::auto(&[&h], &u0, DT)?;
    let k = 8;
    let vels: Vec<f64> = (-2..=2).map(f64::from).collect();
    let ocfg = OracleConfig::new(k, vels, cfg.momenta);
    let points = [(-1.0, 0.25), (-0.4, 0.5), (0.0, 0.5), (0.6, 0.75), (1.0, 1.0)];
    let mut csv = String::from("x,t,oracle,engine,difference,bound\n");
    let mut passed = true;
    let mut worst: f64 = 0.0;
    for &(x, t) in &points {
        let engine = evolve(&h, &u0, t, &cfg)?
            .interpolate(&[x])
            .ok_or_else(|| Failure::Numerical(format!("x = {x} outside the grid")))?;
        let oracle = brute_force_value(&h, &u0, x, t, &ocfg)?.value;
        let diff = (oracle - engine).abs();
        let bound = 0.05 + 5.0 * t / k as f64;
        passed &= diff <= bound;
        worst = worst.max(diff / bound);
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt12(x),
            fmt12(t),
            fmt12(oracle),
            fmt12(engine),
            fmt12(diff),
            fmt12(bound)
        ));
    }
    Ok(Outcome {
        id: 12,
        name: "oracle equivalence",
        passed,
        detail: format!("5 points, largest difference / bound = {}", fmt12(worst)),
        artifacts: vec![("c12_oracle.csv".into(), csv)],
    })
}
