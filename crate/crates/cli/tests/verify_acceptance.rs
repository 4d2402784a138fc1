//! Runs the acceptance suite at the shipped seed and prints one PASS/FAIL
//! line per criterion. Exits non-zero when any criterion fails.
//!
//! `STOCHAVG_ACCEPTANCE_ONLY=1,4` restricts the run to a subset.

use std::process::ExitCode;

use stochavg_cli::acceptance::{run_acceptance, PINNED_SEED};

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::var("STOCHAVG_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    println!("acceptance suite, base seed {PINNED_SEED}");
    let results = match run_acceptance(PINNED_SEED, &only, None, |r| println!("{}", r.line())) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL suite: {e}");
            return ExitCode::FAILURE;
        }
    };
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed} of {} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
