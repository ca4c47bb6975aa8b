//! `asgd verify`: the bound-verification suite. Prints one line per check
//! and exits nonzero if any fails.

use crate::config::resolve_output;
use anyhow::Context;
use asgd::theory::{
    check_divergence, check_fluctuation_bound, check_step_sum_bounds, random_admissible_case,
    random_thetas, verify_averaged_bound, LinearSaConfig, SyntheticProblem,
};
use clap::Args;
use serde_json::json;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Replicates for the averaged-iterate bound check.
    #[arg(long, default_value_t = 200)]
    pub replicates: u64,
    /// Random sandwich cases.
    #[arg(long, default_value_t = 20)]
    pub sandwich_cases: u64,
    /// Seeds per divergence regime.
    #[arg(long, default_value_t = 5)]
    pub divergence_seeds: u64,
    /// Random weight vectors for the fluctuation bound.
    #[arg(long, default_value_t = 20)]
    pub thetas: usize,
    /// Noise draws per weight vector.
    #[arg(long, default_value_t = 100_000)]
    pub draws: u64,
    /// JSON report output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct CheckLine {
    name: &'static str,
    pass: bool,
    detail: serde_json::Value,
}

pub fn run(args: VerifyArgs) -> anyhow::Result<i32> {
    let mut checks: Vec<CheckLine> = Vec::new();

    // Averaged-iterate error bound on a random 10-d SPD instance.
    {
        let cfg = LinearSaConfig::random_verification(10, 100.0, args.seed)?;
        let report = verify_averaged_bound(&cfg, args.replicates, &[100, 1_000, 10_000])?;
        checks.push(CheckLine {
            name: "averaged-iterate bound",
            pass: report.pass,
            detail: serde_json::to_value(&report.checkpoints)?,
        });
    }

    // PSD sandwich on the schedule step sums.
    {
        let mut rows = Vec::new();
        let mut all = true;
        for i in 0..args.sandwich_cases {
            let (matrix, schedule, j, t) = random_admissible_case(args.seed ^ (1_000 + i));
            let outcome = check_step_sum_bounds(&matrix, &schedule, j, t)?;
            all &= outcome.pass;
            rows.push(json!({
                "dim": matrix.nrows(), "j": j, "t": t,
                "lower_min_eig": outcome.lower_min_eig,
                "upper_min_eig": outcome.upper_min_eig,
                "pass": outcome.pass,
            }));
        }
        checks.push(CheckLine {
            name: "step-sum sandwich",
            pass: all,
            detail: serde_json::Value::Array(rows),
        });
    }

    // Divergence threshold: 2.4/M blows up, 0.5/M stays bounded.
    {
        let max_sq_norm = 6.8;
        let mut rows = Vec::new();
        let mut all = true;
        for i in 0..args.divergence_seeds {
            let hot = check_divergence(max_sq_norm, 2.4 / max_sq_norm, 100_000, 10, args.seed ^ (2_000 + i));
            let cool = check_divergence(max_sq_norm, 0.5 / max_sq_norm, 100_000, 10, args.seed ^ (3_000 + i));
            let pass = hot.diverged && !cool.diverged && cool.max_norm < 1e3;
            all &= pass;
            rows.push(json!({
                "seed_offset": i,
                "hot_diverged_at": hot.steps,
                "cool_max_norm": cool.max_norm,
                "pass": pass,
            }));
        }
        checks.push(CheckLine {
            name: "divergence threshold",
            pass: all,
            detail: serde_json::Value::Array(rows),
        });
    }

    // Gradient-fluctuation bound on the regression toy.
    {
        let problem = SyntheticProblem::regression_toy();
        let max_sq_norm = 2.0 * problem.trace();
        let thetas = random_thetas(&problem, args.thetas, args.seed ^ 4_000);
        let report =
            check_fluctuation_bound(&problem, max_sq_norm, &thetas, args.draws, args.seed ^ 5_000)?;
        let worst = report
            .rows
            .iter()
            .map(|r| r.ratio)
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckLine {
            name: "gradient-fluctuation bound",
            pass: report.pass,
            detail: json!({ "worst_ratio": worst, "rows": report.rows }),
        });
    }

    let all_pass = checks.iter().all(|c| c.pass);
    for check in &checks {
        println!(
            "{:28} {}",
            check.name,
            if check.pass { "PASS" } else { "FAIL" }
        );
    }
    println!("overall{:>26}", if all_pass { "PASS" } else { "FAIL" });

    if let Some(path) = &args.out {
        let path = resolve_output(path);
        let doc = json!({
            "command": "verify",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": args.seed,
            "pass": all_pass,
            "checks": checks.iter().map(|c| json!({
                "name": c.name, "pass": c.pass, "detail": c.detail,
            })).collect::<Vec<_>>(),
        });
        std::fs::write(&path, serde_json::to_string_pretty(&doc)?)
            .with_context(|| format!("writing report {}", path.display()))?;
    }

    Ok(if all_pass { 0 } else { 1 })
}
