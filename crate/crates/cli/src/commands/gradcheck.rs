//! Finite-difference verification entry point.

use crate::{CliError, Result};
use sefusion_core::verify::{run_suite, GradCheck, GradCheckOutcome};

/// Run a suite of gradient checks, printing one line per op. Fails with
/// exit code 2 naming the first op whose error exceeds its threshold.
pub fn run_checks(checks: &[GradCheck]) -> Result<Vec<GradCheckOutcome>> {
    let outcomes = run_suite(checks).map_err(CliError::Verification)?;
    for outcome in &outcomes {
        println!(
            "gradcheck {}: max_rel_error={:.3e} threshold={:.0e} {}",
            outcome.name,
            outcome.max_rel_error,
            outcome.threshold,
            if outcome.passed() { "PASS" } else { "FAIL" }
        );
    }
    if let Some(bad) = outcomes.iter().find(|o| !o.passed()) {
        return Err(CliError::Verification(format!(
            "gradient check failed for {}: max relative error {:.3e} exceeds {:.0e}",
            bad.name, bad.max_rel_error, bad.threshold
        )));
    }
    Ok(outcomes)
}

pub fn cmd_gradcheck() -> Result<()> {
    let outcomes = run_checks(&sefusion_core::verify::default_suite())?;
    println!("all {} gradient checks passed", outcomes.len());
    Ok(())
}
