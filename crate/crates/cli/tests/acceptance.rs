//! Acceptance criteria 1 to 13, one pass/fail line each. Criteria 1 to 12
//! run on a single worker; criterion 13 reruns them on eight and compares
//! every CSV artifact byte for byte.

use std::io::Write;
use std::process::ExitCode;

use contact_hj_cli::selftest::{determinism_against, run_numerical, Outcome};

fn report(o: &Outcome) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{}", o.line());
}

fn main() -> ExitCode {
    let outcomes = match run_numerical(1) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("acceptance suite aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    outcomes.iter().for_each(report);
    let reference: Vec<(String, String)> = outcomes.iter().flat_map(|o| o.artifacts.clone()).collect();
    let det = match determinism_against(&reference, 1, 8) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("criterion 13 aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    report(&det);
    let failed: Vec<usize> = outcomes.iter().chain([&det]).filter(|o| !o.passed).map(|o| o.id).collect();
    if failed.is_empty() {
        eprintln!("acceptance: all 13 criteria passed");
        ExitCode::SUCCESS
    } else {
        eprintln!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
