//! `asgd synthetic`: rerun the two synthetic schedule experiments and dump
//! per-arm excess-risk trajectories.

use crate::config::resolve_output;
use anyhow::Context;
use asgd::theory::{run_quadratic_toy, run_regression_toy, ArmTrajectory};
use asgd::trainer::CheckpointSpec;
use clap::{Args, ValueEnum};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Which {
    /// Quadratic problem comparing schedules (good/bad ASGD, SGD, batch mean).
    Toy1,
    /// Linear regression comparing ASGD, SGD and batch least squares.
    Toy2,
}

#[derive(Args, Debug)]
pub struct SyntheticArgs {
    #[arg(value_enum)]
    pub which: Which,
    /// Samples per replicate (default: 10^4 for toy1, 10^5 for toy2).
    #[arg(long)]
    pub steps: Option<u64>,
    /// Replicates to average over.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Log-spaced checkpoints.
    #[arg(long, default_value_t = 20)]
    pub points: u32,
    /// Trajectory CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: SyntheticArgs) -> anyhow::Result<i32> {
    let steps = args.steps.unwrap_or(match args.which {
        Which::Toy1 => 10_000,
        Which::Toy2 => 100_000,
    });
    let checkpoints = CheckpointSpec::log_spaced(args.points, steps);
    let arms = match args.which {
        Which::Toy1 => run_quadratic_toy(steps, args.seeds, &checkpoints, args.seed)?,
        Which::Toy2 => run_regression_toy(steps, args.seeds, &checkpoints, args.seed)?,
    };

    let header = serde_json::json!({
        "command": "synthetic",
        "version": env!("CARGO_PKG_VERSION"),
        "which": format!("{:?}", args.which).to_lowercase(),
        "steps": steps,
        "seeds": args.seeds,
        "seed": args.seed,
        "arms": arms.iter().map(|a| serde_json::json!({
            "arm": a.arm,
            "schedule": a.schedule,
        })).collect::<Vec<_>>(),
    });

    if let Some(path) = &args.out {
        let path = resolve_output(path);
        let mut csv = String::new();
        let _ = writeln!(csv, "# {header}");
        let _ = writeln!(csv, "step,arm,excess_risk");
        for arm in &arms {
            for &(step, excess) in &arm.points {
                let _ = writeln!(csv, "{step},{},{excess}", arm.arm);
            }
        }
        std::fs::write(&path, csv)
            .with_context(|| format!("writing trajectories {}", path.display()))?;
    }

    println!("{header}");
    for ArmTrajectory { arm, points, .. } in &arms {
        let (step, excess) = points.last().expect("checkpoints nonempty");
        println!(
            "{}",
            serde_json::json!({ "arm": arm, "step": step, "excess_risk": excess })
        );
    }
    Ok(0)
}
