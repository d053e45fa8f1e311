//! Command-line and config-file ingestion.
//!
//! A `--config FILE` holds `key = value` lines whose keys are the long flag
//! names of the chosen subcommand (`_` and `-` are interchangeable). File
//! entries are spliced in ahead of the real arguments, so the command line
//! wins whenever both set a key.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use contact_hj::semigroup::step_count;
use contact_hj::Boundary;

use crate::Failure;

#[derive(Debug, Clone, Parser)]
#[command(name = "contact-hj", version, about = "Contact Hamilton-Jacobi semigroups on grids")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Evolve initial data under one Hamiltonian and write the final grid function.
    Evolve(EvolveArgs),
    /// Biconjugate check of the discrete Legendre transform.
    Legendre(LegendreArgs),
    /// Scan the Jacobi bracket of two Hamiltonians over a phase box.
    Bracket(BracketArgs),
    /// Commutation defect of two semigroups, one CSV row per (lambda, mu, dt) cell.
    Commute(CommuteArgs),
    /// Compare S_H(t) with S_tH(1).
    Reparam(ReparamArgs),
    /// Multi-time solution through the frozen combination sum t_i H_i.
    Multitime(MultitimeArgs),
    /// Compare the (mu H + lambda F) flow at time t with the k-scaled flow at t/k.
    Scale(ScaleArgs),
    /// Brute-force value of the variational principle at one point.
    Oracle(OracleArgs),
    /// Run the acceptance suite and print a pass/fail table.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Plain-text `key = value` file; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (a directory for `selftest`); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for the numerical kernels.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Treat velocity or momentum truncation as a numerical failure.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Half-width of the domain [-L, L]^d.
    #[arg(long = "L", default_value_t = 4.0)]
    pub half_width: f64,
    /// Nodes per axis.
    #[arg(long, default_value_t = 201)]
    pub n: usize,
    #[arg(long, default_value_t = Boundary::Clamped)]
    pub boundary: Boundary,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SchemeArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Velocity radius; derived from the Hamiltonians when absent.
    #[arg(long)]
    pub vmax: Option<f64>,
    /// Velocity points per axis (odd).
    #[arg(long)]
    pub vpoints: Option<usize>,
    /// Momentum radius of the inner Legendre supremum.
    #[arg(long)]
    pub pmax: Option<f64>,
    /// Momentum points per axis (odd).
    #[arg(long)]
    pub ppoints: Option<usize>,
    /// Parabolic refinement of the minimising foot.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    pub refine: bool,
    #[arg(long)]
    pub search_radius: Option<usize>,
    #[arg(long, default_value_t = contact_hj::semigroup::DEFAULT_PICARD_TOL)]
    pub picard_tol: f64,
    #[arg(long, default_value_t = contact_hj::semigroup::DEFAULT_PICARD_MAX_ITER)]
    pub picard_max_iter: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub hamiltonian: String,
    /// Grid-function CSV or an expression such as `0.5*abs(x) + cos(2*x)`.
    #[arg(long)]
    pub u0: String,
    #[arg(long)]
    pub t: f64,
    /// Solve the u-dependent fixed point instead of stepping explicitly.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    pub fixed_point: bool,
}

#[derive(Debug, Clone, Args)]
pub struct LegendreArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub hamiltonian: String,
    /// Position, comma-separated per axis.
    #[arg(long, default_value = "0")]
    pub x: String,
    #[arg(long, default_value_t = 0.0)]
    pub u: f64,
    #[arg(long, default_value_t = 8.0)]
    pub vmax: f64,
    #[arg(long, default_value_t = 801)]
    pub vpoints: usize,
    /// Momenta at which H** is compared with H.
    #[arg(long, default_value_t = 2.0)]
    pub pmax: f64,
    #[arg(long, default_value_t = 81)]
    pub ppoints: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BracketArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "H")]
    pub h: String,
    #[arg(long = "F")]
    pub f: String,
    #[arg(long = "box", default_value = "x=-3:3,p=-3:3,u=-2:2")]
    pub phase_box: String,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 11)]
    pub samples: usize,
    #[arg(long, default_value_t = 1000)]
    pub random: usize,
    #[arg(long, default_value_t = contact_hj::bracket::DEFAULT_SEED)]
    pub seed: u64,
    /// Verdict tolerance; depends on gradient availability when absent.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = contact_hj::hamiltonian::DEFAULT_FD_STEP)]
    pub fd_step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CommuteArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long = "H")]
    pub h: String,
    #[arg(long = "F")]
    pub f: String,
    #[arg(long, default_value = "cos(x)")]
    pub u0: String,
    /// Comma-separated list; every (lambda, mu, dt) combination is one cell.
    #[arg(long)]
    pub lambda: String,
    #[arg(long)]
    pub mu: String,
    /// Comma-separated step sizes; replaces `--dt` when given.
    #[arg(long)]
    pub dts: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReparamArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long)]
    pub hamiltonian: String,
    #[arg(long, default_value = "cos(x)")]
    pub u0: String,
    #[arg(long)]
    pub t: f64,
}

#[derive(Debug, Clone, Args)]
pub struct MultitimeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Comma-separated selectors.
    #[arg(long = "H")]
    pub h: String,
    /// Comma-separated times, one per selector.
    #[arg(long)]
    pub t: String,
    #[arg(long, default_value = "cos(x)")]
    pub u0: String,
}

#[derive(Debug, Clone, Args)]
pub struct ScaleArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long = "H")]
    pub h: String,
    #[arg(long = "F")]
    pub f: String,
    #[arg(long, default_value = "cos(x)")]
    pub u0: String,
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long)]
    pub k: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub hamiltonian: String,
    #[arg(long)]
    pub u0: String,
    #[arg(long)]
    pub x: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long = "K", default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value = "-2,-1,0,1,2")]
    pub vels: String,
    #[arg(long, default_value_t = contact_hj::oracle::DEFAULT_PICARD_ROUNDS)]
    pub picard_rounds: usize,
    #[arg(long, default_value_t = 8.0)]
    pub pmax: f64,
    #[arg(long, default_value_t = 1601)]
    pub ppoints: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[command(flatten)]
    pub common: Common,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Evolve(a) => &a.common,
            Command::Legendre(a) => &a.common,
            Command::Bracket(a) => &a.common,
            Command::Commute(a) => &a.common,
            Command::Reparam(a) => &a.common,
            Command::Multitime(a) => &a.common,
            Command::Scale(a) => &a.common,
            Command::Oracle(a) => &a.common,
            Command::Selftest(a) => &a.common,
        }
    }
}

/// Parses argv (program name first), merging `--config` when present, and
/// validates every numeric field before anything is computed.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, Failure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = splice_config_file(argv)?;
    let mut cmd = RunConfig::command();
    cmd = cmd.mut_subcommands(|s| s.args_override_self(true));
    let matches = cmd.try_get_matches_from(argv).map_err(Failure::Clap)?;
    let cfg = RunConfig::from_arg_matches(&matches).map_err(Failure::Clap)?;
    validate(&cfg)?;
    Ok(cfg)
}

fn splice_config_file(argv: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let strings: Vec<Option<&str>> = argv.iter().map(|a| a.to_str()).collect();
    let mut path = None;
    for (i, a) in strings.iter().enumerate().skip(2) {
        match a {
            Some("--config") => path = strings.get(i + 1).copied().flatten().map(str::to_string),
            Some(s) if s.starts_with("--config=") => path = Some(s["--config=".len()..].to_string()),
            _ => {}
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let sub = strings.get(1).copied().flatten().unwrap_or_default();
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::Config(format!("config: cannot read `{path}`: {e}")))?;
    let known = long_flags(sub)?;
    let mut spliced = argv[..2].to_vec();
    for entry in parse_key_values(&text)? {
        let (key, value) = entry;
        if key == "config" || !known.contains(&key) {
            return Err(Failure::Config(format!("config: unknown key `{key}` for `{sub}`")));
        }
        spliced.push(format!("--{key}={value}").into());
    }
    spliced.extend(argv[2..].iter().cloned());
    Ok(spliced)
}

fn long_flags(sub: &str) -> Result<Vec<String>, Failure> {
    let cmd = RunConfig::command();
    let sc = cmd
        .find_subcommand(sub)
        .ok_or_else(|| Failure::Config(format!("config: unknown subcommand `{sub}`")))?;
    Ok(sc.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect())
}

/// `key = value` pairs, skipping blank lines and `#` comments. Values may be
/// wrapped in double quotes.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, Failure> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("config line {}: expected `key = value`", lineno + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Failure::Config(format!("config line {}: empty key", lineno + 1)));
        }
        let v = v.trim();
        let value = v
            .strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
            .unwrap_or(v)
            .to_string();
        if out.iter().any(|(k, _)| *k == key) {
            return Err(Failure::Config(format!("config: key `{key}` given twice")));
        }
        out.push((key, value));
    }
    Ok(out)
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Config(format!("{key} must be positive")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), Failure> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Config(format!("{key} must be non-negative")))
    }
}

fn odd_points(key: &str, m: usize) -> Result<(), Failure> {
    if m >= 3 && m % 2 == 1 {
        Ok(())
    } else {
        Err(bad(key, format!("must be odd and at least 3, got {m}")))
    }
}

fn integral(key: &str, t: f64, dt: f64) -> Result<(), Failure> {
    step_count(t, dt).map(|_| ()).map_err(|e| bad(key, e))
}

fn check_common(c: &Common, out_is_dir: bool) -> Result<(), Failure> {
    if c.workers == Some(0) {
        return Err(Failure::Config("workers must be positive".into()));
    }
    if let Some(out) = &c.out {
        let dir = if out_is_dir {
            Some(out.as_path())
        } else {
            out.parent().filter(|p| !p.as_os_str().is_empty())
        };
        if let Some(dir) = dir {
            if !dir.is_dir() {
                return Err(bad("out", format!("directory `{}` does not exist", dir.display())));
            }
        }
    }
    Ok(())
}

fn check_grid(g: &GridArgs) -> Result<(), Failure> {
    positive("L", g.half_width)?;
    if g.n < 3 {
        return Err(bad("n", format!("need at least 3 nodes, got {}", g.n)));
    }
    if !(1..=2).contains(&g.dim) {
        return Err(bad("dim", format!("must be 1 or 2, got {}", g.dim)));
    }
    Ok(())
}

fn check_scheme(s: &SchemeArgs) -> Result<(), Failure> {
    positive("dt", s.dt)?;
    if let Some(v) = s.vmax {
        positive("vmax", v)?;
    }
    if let Some(m) = s.vpoints {
        odd_points("vpoints", m)?;
    }
    if let Some(v) = s.pmax {
        positive("pmax", v)?;
    }
    if let Some(m) = s.ppoints {
        odd_points("ppoints", m)?;
    }
    positive("picard-tol", s.picard_tol)?;
    if s.picard_max_iter == 0 {
        return Err(bad("picard-max-iter", "must be at least 1"));
    }
    Ok(())
}

/// Splits on commas outside parentheses, so nested selectors survive.
pub fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur.trim().to_string());
    out
}

pub fn parse_list(key: &str, s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| bad(key, format!("`{}` is not a number", t.trim())))
        })
        .collect()
}

fn validate(cfg: &RunConfig) -> Result<(), Failure> {
    match &cfg.command {
        Command::Evolve(a) => {
            check_common(&a.common, false)?;
            check_grid(&a.grid)?;
            check_scheme(&a.scheme)?;
            non_negative("t", a.t)?;
            integral("t", a.t, a.scheme.dt)
        }
        Command::Legendre(a) => {
            check_common(&a.common, false)?;
            positive("vmax", a.vmax)?;
            odd_points("vpoints", a.vpoints)?;
            positive("pmax", a.pmax)?;
            odd_points("ppoints", a.ppoints)?;
            parse_list("x", &a.x).map(|_| ())
        }
        Command::Bracket(a) => {
            check_common(&a.common, false)?;
            if !(1..=2).contains(&a.dim) {
                return Err(bad("dim", format!("must be 1 or 2, got {}", a.dim)));
            }
            if a.samples == 0 {
                return Err(bad("samples", "must be at least 1"));
            }
            positive("fd-step", a.fd_step)?;
            if let Some(t) = a.tol {
                positive("tol", t)?;
            }
            Ok(())
        }
        Command::Commute(a) => {
            check_common(&a.common, false)?;
            check_grid(&a.grid)?;
            check_scheme(&a.scheme)?;
            let dts = commute_dts(a)?;
            for dt in &dts {
                positive("dts", *dt)?;
            }
            for (key, list) in [("lambda", &a.lambda), ("mu", &a.mu)] {
                for v in parse_list(key, list)? {
                    non_negative(key, v)?;
                    for dt in &dts {
                        integral(key, v, *dt)?;
                    }
                }
            }
            Ok(())
        }
        Command::Reparam(a) => {
            check_common(&a.common, false)?;
            check_grid(&a.grid)?;
            check_scheme(&a.scheme)?;
            non_negative("t", a.t)?;
            integral("t", a.t, a.scheme.dt)
        }
        Command::Multitime(a) => {
            check_common(&a.common, false)?;
            check_grid(&a.grid)?;
            check_scheme(&a.scheme)?;
            let ts = parse_list("t", &a.t)?;
            for t in &ts {
                non_negative("t", *t)?;
            }
            if ts.len() != split_top_level(&a.h).len() {
                return Err(bad("t", "need one time per Hamiltonian in --H"));
            }
            integral("dt", 1.0, a.scheme.dt)
        }
        Command::Scale(a) => {
            check_common(&a.common, false)?;
            check_grid(&a.grid)?;
            check_scheme(&a.scheme)?;
            non_negative("t", a.t)?;
            non_negative("lambda", a.lambda)?;
            non_negative("mu", a.mu)?;
            positive("k", a.k)?;
            integral("t", a.t, a.scheme.dt)
        }
        Command::Oracle(a) => {
            check_common(&a.common, false)?;
            check_grid(&a.grid)?;
            non_negative("t", a.t)?;
            if a.k == 0 {
                return Err(bad("K", "must be at least 1"));
            }
            if a.picard_rounds == 0 {
                return Err(bad("picard-rounds", "must be at least 1"));
            }
            positive("pmax", a.pmax)?;
            odd_points("ppoints", a.ppoints)?;
            let v = parse_list("vels", &a.vels)?;
            if !v.contains(&0.0) {
                return Err(bad("vels", "must contain 0"));
            }
            Ok(())
        }
        Command::Selftest(a) => check_common(&a.common, true),
    }
}

pub fn commute_dts(a: &CommuteArgs) -> Result<Vec<f64>, Failure> {
    let mut dts = vec![a.scheme.dt];
    if let Some(extra) = &a.dts {
        dts = parse_list("dts", extra)?;
    }
    Ok(dts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, Failure> {
        let mut v = vec!["contact-hj"];
        v.extend_from_slice(args);
        parse_config(v)
    }

    #[test]
    fn happy_path() {
        let cfg = parse(&["evolve", "--hamiltonian", "quadratic", "--u0", "abs(x)", "--t", "0.5", "--dt", "1e-3"]).unwrap();
        let Command::Evolve(a) = cfg.command else { panic!() };
        assert_eq!(a.t, 0.5);
        assert_eq!(a.grid.n, 201);
    }

    #[test]
    fn zero_dt_names_the_key() {
        let err = parse(&["evolve", "--hamiltonian", "quadratic", "--u0", "abs(x)", "--t", "0.5", "--dt", "0"]).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("dt must be positive"), "{err}");
    }

    #[test]
    fn non_integral_step_count() {
        let err = parse(&["evolve", "--hamiltonian", "quadratic", "--u0", "abs(x)", "--t", "0.5", "--dt", "0.3"]).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("t/dt not integral"), "{err}");
    }

    #[test]
    fn config_file_merges_and_command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# run\nhamiltonian = \"discount(alpha=1)\"\nt = 0.25\npicard_tol = 1e-8\n").unwrap();
        let cfg = parse(&["evolve", "--config", path.to_str().unwrap(), "--u0", "1", "--t", "0.5"]).unwrap();
        let Command::Evolve(a) = cfg.command else { panic!() };
        assert_eq!(a.hamiltonian, "discount(alpha=1)");
        assert_eq!(a.t, 0.5);
        assert_eq!(a.scheme.picard_tol, 1e-8);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "hamiltonian = quadratic\nspeed = 3\n").unwrap();
        let err = parse(&["evolve", "--config", path.to_str().unwrap(), "--u0", "1", "--t", "0.5"]).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("`speed`"), "{err}");
    }

    #[test]
    fn missing_output_directory() {
        let err = parse(&["bracket", "--H", "p1", "--F", "x1", "--out", "/nonexistent/dir/r.csv"]).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().starts_with("out:"), "{err}");
    }

    #[test]
    fn top_level_split_keeps_nested_selectors() {
        assert_eq!(
            split_top_level("quadratic, shift(c=1,of=discount(alpha=1))"),
            vec!["quadratic".to_string(), "shift(c=1,of=discount(alpha=1))".to_string()]
        );
    }

    #[test]
    fn commute_lambda_must_divide_every_dt() {
        let err = parse(&["commute", "--H", "quadratic", "--F", "quadratic", "--lambda", "0.25", "--mu", "0.25", "--dts", "0.004,0.3"]).unwrap_err();
        assert!(err.to_string().contains("t/dt not integral"), "{err}");
    }
}
