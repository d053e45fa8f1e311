//! Dispatch from a validated [`RunConfig`] to the library.

use std::io::Write;
use std::path::Path;

use contact_hj::bracket::{bracket_scan_with_samples, samples_to_csv, PhaseBox, ScanOptions};
use contact_hj::catalog;
use contact_hj::format::fmt12;
use contact_hj::hamiltonian::combination;
use contact_hj::harness::{commutation_defect, multitime_solve, reparam_check, scaling_check};
use contact_hj::initial::InitialData;
use contact_hj::oracle::{brute_force_value, OracleConfig};
use contact_hj::semigroup::{evolve_with_diagnostics, fixed_point_a, SemigroupConfig};
use contact_hj::transform::{biconjugate_check, VelocityGrid};
use contact_hj::{GridFunction, GridSpec, HamiltonianSpec};

use crate::config::{
    commute_dts, parse_list, split_top_level, BracketArgs, Command, Common, CommuteArgs, EvolveArgs, GridArgs,
    LegendreArgs, MultitimeArgs, OracleArgs, ReparamArgs, RunConfig, ScaleArgs, SchemeArgs,
};
use crate::{selftest, Failure};

/// Runs the subcommand inside a pool of `--workers` threads and returns the
/// exit code.
pub fn run(cfg: &RunConfig) -> Result<i32, Failure> {
    let common = cfg.command.common();
    match common.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Numerical(format!("cannot start {n} workers: {e}")))?;
            pool.install(|| dispatch(&cfg.command))
        }
        None => dispatch(&cfg.command),
    }
}

fn dispatch(cmd: &Command) -> Result<i32, Failure> {
    match cmd {
        Command::Evolve(a) => evolve_cmd(a),
        Command::Legendre(a) => legendre_cmd(a),
        Command::Bracket(a) => bracket_cmd(a),
        Command::Commute(a) => commute_cmd(a),
        Command::Reparam(a) => reparam_cmd(a),
        Command::Multitime(a) => multitime_cmd(a),
        Command::Scale(a) => scale_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::Selftest(a) => selftest::run_cli(&a.common),
    }
}

pub fn resolve(key: &str, selector: &str) -> Result<HamiltonianSpec, Failure> {
    catalog::resolve(selector).map_err(|e| Failure::keyed(key, e))
}

pub fn grid(g: &GridArgs) -> Result<GridSpec, Failure> {
    GridSpec::new(g.dim, g.half_width, g.n, g.boundary).map_err(|e| Failure::keyed("n", e))
}

/// Reads a grid-function CSV when `src` names an existing file, otherwise
/// parses it as an initial-data expression.
pub fn load_u0(src: &str, grid: GridSpec) -> Result<GridFunction, Failure> {
    let path = Path::new(src);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("u0: cannot read `{src}`: {e}")))?;
        return GridFunction::from_csv(grid, &text).map_err(|e| Failure::keyed("u0", e));
    }
    let expr = InitialData::parse(src).map_err(|e| Failure::keyed("u0", e))?;
    expr.sample(grid).map_err(|e| Failure::keyed("u0", e))
}

/// The derived configuration, with every explicitly given flag applied on top.
pub fn scheme(s: &SchemeArgs, specs: &[&HamiltonianSpec], u0: &GridFunction, dt: f64) -> Result<SemigroupConfig, Failure> {
    let mut cfg = SemigroupConfig::auto(specs, u0, dt).map_err(|e| Failure::keyed("hamiltonian", e))?;
    let d = u0.grid().dim();
    if s.vmax.is_some() || s.vpoints.is_some() {
        cfg.velocities = VelocityGrid::new(
            s.vmax.unwrap_or(cfg.velocities.v_max()),
            s.vpoints.unwrap_or(cfg.velocities.m()),
            d,
        )
        .map_err(|e| Failure::keyed("vpoints", e))?;
    }
    if s.pmax.is_some() || s.ppoints.is_some() {
        cfg.momenta = VelocityGrid::new(
            s.pmax.unwrap_or(cfg.momenta.v_max()),
            s.ppoints.unwrap_or(cfg.momenta.m()),
            d,
        )
        .map_err(|e| Failure::keyed("ppoints", e))?;
    }
    cfg.refine = s.refine;
    cfg.search_radius = s.search_radius;
    cfg.picard_tol = s.picard_tol;
    cfg.picard_max_iter = s.picard_max_iter;
    cfg.validate(u0.grid()).map_err(|e| Failure::keyed("search-radius", e))?;
    Ok(cfg)
}

/// Writes `text` to `--out`, or to stdout without one.
pub fn emit(common: &Common, text: &str) -> Result<(), Failure> {
    match &common.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Numerical(format!("cannot write `{}`: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Numerical(format!("cannot write to stdout: {e}")))
        }
    }
}

fn evolve_cmd(a: &EvolveArgs) -> Result<i32, Failure> {
    let h = resolve("hamiltonian", &a.hamiltonian)?;
    let u0 = load_u0(&a.u0, grid(&a.grid)?)?;
    let cfg = scheme(&a.scheme, &[&h], &u0, a.scheme.dt)?;
    let u = if a.fixed_point {
        let fp = fixed_point_a(&h, &u0, a.t, &cfg)?;
        eprintln!(
            "fixed point: {} picard iterations, last residual {}",
            fp.picard_iterations(),
            fp.residuals.last().map_or("0".to_string(), |r| fmt12(*r))
        );
        fp.table.last()?
    } else {
        let (u, diag) = evolve_with_diagnostics(&h, &u0, a.t, &cfg)?;
        eprintln!(
            "steps={} truncation_hits={} momentum_edge_hits={}",
            diag.steps, diag.truncation_hits, diag.momentum_edge_hits
        );
        if a.common.strict && (diag.truncation_hits > 0 || diag.momentum_edge_hits > 0) {
            return Err(Failure::Numerical(format!(
                "strict: {} velocity truncation hits, {} momentum edge hits",
                diag.truncation_hits, diag.momentum_edge_hits
            )));
        }
        u
    };
    emit(&a.common, &u.to_csv())?;
    Ok(0)
}

fn legendre_cmd(a: &LegendreArgs) -> Result<i32, Failure> {
    let h = resolve("hamiltonian", &a.hamiltonian)?;
    let x = parse_list("x", &a.x)?;
    let d = x.len();
    let vg = VelocityGrid::new(a.vmax, a.vpoints, d).map_err(|e| Failure::keyed("vpoints", e))?;
    let pg = VelocityGrid::new(a.pmax, a.ppoints, d).map_err(|e| Failure::keyed("ppoints", e))?;
    let report = biconjugate_check(&h, &x, a.u, &vg, &pg).map_err(|e| Failure::keyed("hamiltonian", e))?;
    eprintln!(
        "max_deviation={} boundary_hits={}",
        fmt12(report.max_deviation),
        report.boundary_hits
    );
    emit(&a.common, &report.to_csv())?;
    if a.common.strict && report.boundary_hits > 0 {
        return Err(Failure::Numerical(format!(
            "strict: {} maximisers on the velocity boundary",
            report.boundary_hits
        )));
    }
    Ok(0)
}

fn bracket_cmd(a: &BracketArgs) -> Result<i32, Failure> {
    let h = resolve("H", &a.h)?;
    let f = resolve("F", &a.f)?;
    let phase = PhaseBox::parse(&a.phase_box, a.dim).map_err(|e| Failure::keyed("box", e))?;
    let opts = ScanOptions {
        samples_per_axis: a.samples,
        tolerance: a.tol,
        fd_step: a.fd_step,
        random_points: a.random,
        seed: a.seed,
        ..ScanOptions::default()
    };
    let (r, samples) = bracket_scan_with_samples(&h, &f, &phase, &opts)?;
    let (x, p, u) = &r.arg_extreme;
    eprintln!(
        "max_abs={} max_pos={} min_neg={} verdict={} samples={} tolerance={} seed={} grad_cap_hits={} extreme_at=(x={}, p={}, u={})",
        fmt12(r.max_abs),
        fmt12(r.max_pos),
        fmt12(r.min_neg),
        r.verdict,
        r.samples,
        fmt12(r.tolerance),
        r.seed,
        r.grad_cap_hits,
        join(x),
        join(p),
        fmt12(*u)
    );
    emit(&a.common, &samples_to_csv(&samples))?;
    Ok(0)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt12(*x)).collect::<Vec<_>>().join(" ")
}

pub const COMMUTE_HEADER: &str = "lambda,mu,dt,sup_abs,max_signed,min_signed,verdict\n";

fn commute_cmd(a: &CommuteArgs) -> Result<i32, Failure> {
    let h = resolve("H", &a.h)?;
    let f = resolve("F", &a.f)?;
    let u0 = load_u0(&a.u0, grid(&a.grid)?)?;
    let lambdas = parse_list("lambda", &a.lambda)?;
    let mus = parse_list("mu", &a.mu)?;
    let mut csv = String::from(COMMUTE_HEADER);
    for dt in commute_dts(a)? {
        let cfg = scheme(&a.scheme, &[&h, &f], &u0, dt)?;
        for &lambda in &lambdas {
            for &mu in &mus {
                let r = commutation_defect(&h, &f, &u0, lambda, mu, &cfg)?;
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    fmt12(lambda),
                    fmt12(mu),
                    fmt12(dt),
                    fmt12(r.sup_abs_defect),
                    fmt12(r.max_signed),
                    fmt12(r.min_signed),
                    r.verdict
                ));
            }
        }
    }
    emit(&a.common, &csv)?;
    Ok(0)
}

fn reparam_cmd(a: &ReparamArgs) -> Result<i32, Failure> {
    let h = resolve("hamiltonian", &a.hamiltonian)?;
    let u0 = load_u0(&a.u0, grid(&a.grid)?)?;
    let cfg = scheme(&a.scheme, &[&h], &u0, a.scheme.dt)?;
    let d = reparam_check(&h, &u0, a.t, &cfg)?;
    emit(&a.common, &format!("t,dt,defect\n{},{},{}\n", fmt12(a.t), fmt12(cfg.dt), fmt12(d)))?;
    Ok(0)
}

fn multitime_cmd(a: &MultitimeArgs) -> Result<i32, Failure> {
    let hs = split_top_level(&a.h)
        .iter()
        .map(|s| resolve("H", s))
        .collect::<Result<Vec<_>, _>>()?;
    let ts = parse_list("t", &a.t)?;
    let u0 = load_u0(&a.u0, grid(&a.grid)?)?;
    let terms: Vec<(f64, &HamiltonianSpec)> = ts.iter().copied().zip(&hs).collect();
    let g = combination(&terms);
    let u = if ts.iter().all(|&t| t == 0.0) {
        u0
    } else {
        let cfg = scheme(&a.scheme, &[&g], &u0, a.scheme.dt)?;
        multitime_solve(&hs, &ts, &u0, &cfg).map_err(|e| Failure::keyed("H", e))?
    };
    emit(&a.common, &u.to_csv())?;
    Ok(0)
}

fn scale_cmd(a: &ScaleArgs) -> Result<i32, Failure> {
    let h = resolve("H", &a.h)?;
    let f = resolve("F", &a.f)?;
    let u0 = load_u0(&a.u0, grid(&a.grid)?)?;
    let g = combination(&[(a.mu, &h), (a.lambda, &f)]);
    let cfg = if a.mu == 0.0 && a.lambda == 0.0 {
        scheme(&a.scheme, &[&h, &f], &u0, a.scheme.dt)?
    } else {
        scheme(&a.scheme, &[&g], &u0, a.scheme.dt)?
    };
    let d = scaling_check(&h, &f, &u0, a.t, a.lambda, a.mu, a.k, &cfg)?;
    emit(
        &a.common,
        &format!(
            "t,lambda,mu,k,dt,defect\n{},{},{},{},{},{}\n",
            fmt12(a.t),
            fmt12(a.lambda),
            fmt12(a.mu),
            fmt12(a.k),
            fmt12(cfg.dt),
            fmt12(d)
        ),
    )?;
    Ok(0)
}

fn oracle_cmd(a: &OracleArgs) -> Result<i32, Failure> {
    let h = resolve("hamiltonian", &a.hamiltonian)?;
    let u0 = load_u0(&a.u0, grid(&a.grid)?)?;
    let momenta = VelocityGrid::new(a.pmax, a.ppoints, 1).map_err(|e| Failure::keyed("ppoints", e))?;
    let mut ocfg = OracleConfig::new(a.k, parse_list("vels", &a.vels)?, momenta);
    ocfg.picard_rounds = a.picard_rounds;
    let r = brute_force_value(&h, &u0, a.x, a.t, &ocfg).map_err(|e| match e {
        contact_hj::Error::EnumerationBudget { .. } => Failure::keyed("K", e),
        e => Failure::from(e),
    })?;
    if !r.converged {
        eprintln!(
            "warning: last picard round moved the value by {}",
            fmt12(r.last_change)
        );
    }
    emit(
        &a.common,
        &format!(
            "x,t,K,value,last_change\n{},{},{},{},{}\n",
            fmt12(a.x),
            fmt12(a.t),
            a.k,
            fmt12(r.value),
            fmt12(r.last_change)
        ),
    )?;
    Ok(0)
}
