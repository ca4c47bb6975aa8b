//! `asgd eval`: score a saved snapshot against a libsvm file.

use crate::commands::load_samples;
use crate::snapshot::ModelSnapshot;
use asgd::evaluate::evaluate_model;
use asgd::LinearModel;
use clap::Args;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model snapshot written by `asgd train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Evaluation data (libsvm text, .gz accepted).
    #[arg(long)]
    pub data: PathBuf,
}

pub fn run(args: EvalArgs) -> anyhow::Result<i32> {
    let snapshot = ModelSnapshot::load(&args.model)?;
    let base_dim = snapshot.dim - snapshot.bias as usize;
    let samples = load_samples(&args.data, base_dim, snapshot.bias, &snapshot.label_map)?;

    for (name, weights) in [
        ("theta", snapshot.theta.clone()),
        ("theta_bar", snapshot.theta_bar.clone()),
    ] {
        let model = LinearModel::from_weights(weights)?;
        let summary = evaluate_model(&model, &samples, snapshot.loss, snapshot.lambda)?;
        println!(
            "{}",
            serde_json::json!({
                "model": name,
                "error_rate": summary.error_rate,
                "cost": summary.mean_cost,
                "n": summary.n,
            })
        );
    }
    Ok(0)
}
