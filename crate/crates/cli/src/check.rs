//! `otloss gradcheck`: run the seeded finite-difference suites and report
//! the worst relative error per loss.

use clap::Args;

use otloss::gradcheck::{run as run_suites, CheckTarget};

use crate::CliError;

#[derive(Args)]
pub struct GradcheckArgs {
    /// Base seed for the 20 instances of each suite.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Which loss to check: ce, focal, dice, topo, or all.
    #[arg(long, default_value = "all")]
    pub which: String,
    /// Harness sanity hook: perturb one analytic gradient entry so the
    /// suites must fail.
    #[arg(long, hide = true, default_value_t = false)]
    pub corrupt: bool,
}

pub fn run(args: GradcheckArgs) -> Result<(), CliError> {
    let which = match args.which.as_str() {
        "all" => None,
        name => Some(
            CheckTarget::parse(name)
                .ok_or_else(|| CliError::parse(format!("unknown loss name {name:?}")))?,
        ),
    };
    let corruption = if args.corrupt { 1e-2 } else { 0.0 };
    let reports = run_suites(which, args.seed, corruption)?;
    let mut failures = Vec::new();
    for report in &reports {
        let status = if report.passed { "PASS" } else { "FAIL" };
        println!(
            "{}: max_rel_err={:.3e} threshold={:.0e} instances={} {}",
            report.target.name(),
            report.max_rel_err,
            report.target.threshold(),
            report.instances,
            status
        );
        if !report.passed {
            failures.push(report.target.name());
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::check(format!(
            "gradient check failed for: {}",
            failures.join(", ")
        )))
    }
}
