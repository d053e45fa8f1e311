//! Configuration, dispatch and artifact emission for the `contact-hj` binary.

pub mod config;
pub mod run;
pub mod selftest;

use std::ffi::OsString;
use std::fmt;

pub use config::{parse_config, RunConfig};
pub use run::run;

/// Everything that ends a run early, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Invalid input; the message names the offending key.
    Config(String),
    /// The computation itself failed (non-convergence, strict truncation, I/O).
    Numerical(String),
    Clap(clap::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 1,
            Failure::Clap(e) => e.exit_code(),
        }
    }

    /// Tags a library error with the config key whose value caused it.
    pub fn keyed(key: &str, e: contact_hj::Error) -> Self {
        match Failure::from(e) {
            Failure::Config(m) => Failure::Config(format!("{key}: {m}")),
            other => other,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) | Failure::Numerical(m) => f.write_str(m),
            Failure::Clap(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<contact_hj::Error> for Failure {
    fn from(e: contact_hj::Error) -> Self {
        use contact_hj::Error as E;
        match e {
            E::NoConvergence { .. }
            | E::HamiltonianOverflow { .. }
            | E::NonFiniteConjugate { .. }
            | E::GradientStencil { .. }
            | E::CurveOffGrid(_) => Failure::Numerical(e.to_string()),
            E::Precondition(_)
            | E::StepCount { .. }
            | E::EnumerationBudget { .. }
            | E::Parse { .. }
            | E::UnknownHamiltonian(_) => Failure::Config(e.to_string()),
        }
    }
}

/// Parses, runs and reports; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let outcome = parse_config(argv).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(code) => code,
        Err(Failure::Clap(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
