//! `asgd train`: one or more passes over a libsvm file, with per-checkpoint
//! held-out evaluation, a metrics table and a model snapshot.

use crate::commands::load_samples;
use crate::config::{
    find_preset, resolve_output, CheckpointChoice, DataConfig, RunConfig, ScheduleChoice,
};
use crate::report::{write_metrics_csv, write_metrics_json};
use crate::snapshot::ModelSnapshot;
use anyhow::{bail, Context};
use asgd::evaluate::evaluate_model;
use asgd::ingest::{open_libsvm, prepare_stream, IngestOptions};
use asgd::trainer::{
    Algorithm, AveragingStart, CheckpointSpec, Evaluation, TrainRun, TrainerConfig,
};
use asgd::{LinearModel, LossKind, Sample, Schedule, WhichModel};
use clap::Args;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON run-config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named benchmark preset supplying lambda, loss and t0.
    #[arg(long)]
    pub preset: Option<String>,
    /// Training data (libsvm text, .gz accepted).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Held-out evaluation data.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Declared feature dimensionality (grown from the data when absent).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Append a constant-1 bias feature.
    #[arg(long)]
    pub bias: bool,
    /// sgd | asgd
    #[arg(long)]
    pub algorithm: Option<String>,
    /// squared | hinge | l2svm | logistic
    #[arg(long)]
    pub loss: Option<String>,
    /// L2 regularization coefficient (doubles as the curvature proxy for the
    /// auto schedule).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fixed averaging start step (bypasses detection).
    #[arg(long)]
    pub t0: Option<u64>,
    #[arg(long)]
    pub passes: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Geometric checkpoints per pass.
    #[arg(long)]
    pub checkpoints: Option<u32>,
    /// Only emit the final metrics row.
    #[arg(long)]
    pub final_only: bool,
    #[arg(long)]
    pub out_metrics: Option<PathBuf>,
    #[arg(long)]
    pub out_metrics_json: Option<PathBuf>,
    #[arg(long)]
    pub out_model: Option<PathBuf>,
}

fn parse_algorithm(s: &str) -> anyhow::Result<Algorithm> {
    match s {
        "sgd" => Ok(Algorithm::Sgd),
        "asgd" => Ok(Algorithm::Asgd),
        other => bail!("unknown algorithm {other:?} (expected sgd or asgd)"),
    }
}

fn merged_config(args: &TrainArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(name) = &args.preset {
        let preset = find_preset(name)?;
        cfg.trainer.lambda = preset.lambda;
        cfg.trainer.loss = preset.loss;
        cfg.trainer.t0 = preset.t0;
    }
    if let Some(path) = &args.data {
        match &mut cfg.data {
            Some(dc) => dc.path = path.clone(),
            None => cfg.data = Some(DataConfig::new(path.clone())),
        }
    }
    let Some(data) = cfg.data.as_mut() else {
        bail!("training needs a data path (--data or the config file)");
    };
    if let Some(dim) = args.dim {
        data.dim = Some(dim);
    }
    if args.bias {
        data.bias = true;
    }
    if let Some(test) = &args.test {
        cfg.eval.test_path = Some(test.clone());
    }
    if let Some(a) = &args.algorithm {
        cfg.trainer.algorithm = parse_algorithm(a)?;
    }
    if let Some(l) = &args.loss {
        cfg.trainer.loss = LossKind::from_str(l)?;
    }
    if let Some(lambda) = args.lambda {
        cfg.trainer.lambda = lambda;
    }
    if let Some(t0) = args.t0 {
        cfg.trainer.t0 = Some(t0);
    }
    if let Some(passes) = args.passes {
        cfg.trainer.passes = passes;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(points) = args.checkpoints {
        cfg.trainer.checkpoints = CheckpointChoice::Geometric(points);
    }
    if args.final_only {
        cfg.trainer.checkpoints = CheckpointChoice::Final;
    }
    if let Some(p) = &args.out_metrics {
        cfg.output.metrics = Some(p.clone());
    }
    if let Some(p) = &args.out_metrics_json {
        cfg.output.metrics_json = Some(p.clone());
    }
    if let Some(p) = &args.out_model {
        cfg.output.model = Some(p.clone());
    }
    Ok(cfg)
}

pub fn run(args: TrainArgs) -> anyhow::Result<i32> {
    let cfg = merged_config(&args)?;
    let data = cfg.data.clone().expect("checked in merged_config");
    let trainer = &cfg.trainer;

    let opts = IngestOptions {
        declared_dim: data.dim,
        bias: data.bias,
        label_map: data.label_map.clone(),
        m_prefix: data.m_prefix,
    };
    let reader = open_libsvm(&data.path)
        .with_context(|| format!("opening training data {}", data.path.display()))?;
    let (meta, mut stream) = prepare_stream(reader, &opts)?;
    let base_dim = meta.dim - data.bias as usize;

    let schedule = match trainer.schedule {
        ScheduleChoice::Fixed(s) => s,
        ScheduleChoice::Auto => {
            if trainer.lambda <= 0.0 {
                bail!(
                    "the auto schedule needs lambda > 0: the regularizer doubles \
                     as the smallest-curvature proxy"
                );
            }
            Schedule::recommended(trainer.loss, meta.max_sq_norm, trainer.lambda)?
        }
    };

    let test: Option<Vec<Sample>> = match &cfg.eval.test_path {
        Some(path) => Some(load_samples(path, base_dim, data.bias, &data.label_map)?),
        None => None,
    };

    let trainer_cfg = TrainerConfig {
        algorithm: trainer.algorithm,
        loss: trainer.loss,
        lambda: trainer.lambda,
        schedule,
        averaging: match trainer.t0 {
            Some(k) => AveragingStart::Fixed(k),
            None => AveragingStart::Auto {
                warmup: trainer.warmup,
            },
        },
        checkpoints: match &trainer.checkpoints {
            CheckpointChoice::Final => CheckpointSpec::FinalOnly,
            CheckpointChoice::Geometric(points) => CheckpointSpec::Geometric {
                points: *points,
                pass_len: None,
            },
            CheckpointChoice::Steps(steps) => CheckpointSpec::Steps(steps.clone()),
        },
    };

    let loss = trainer.loss;
    let lambda = trainer.lambda;
    let mut evaluator = move |_which: WhichModel, model: &LinearModel| -> asgd::Result<Evaluation> {
        match &test {
            Some(samples) => {
                let summary = evaluate_model(model, samples, loss, lambda)?;
                Ok(Evaluation {
                    error_rate: summary.error_rate,
                    cost: summary.mean_cost,
                    excess_risk: None,
                })
            }
            None => Ok(Evaluation {
                error_rate: None,
                cost: f64::NAN,
                excess_risk: None,
            }),
        }
    };

    let mut run = TrainRun::new(&trainer_cfg, meta.dim)?;
    run.run_pass(&mut stream, &mut evaluator)?;
    for _ in 1..trainer.passes.max(1) {
        let reader = open_libsvm(&data.path)?;
        let pass_opts = IngestOptions {
            declared_dim: Some(base_dim),
            ..opts.clone()
        };
        let (_, mut pass_stream) = prepare_stream(reader, &pass_opts)?;
        run.run_pass(&mut pass_stream, &mut evaluator)?;
    }
    let outcome = run.finish(&mut evaluator)?;

    let header = serde_json::json!({
        "command": "train",
        "version": env!("CARGO_PKG_VERSION"),
        "data": data.path,
        "algorithm": trainer.algorithm,
        "loss": trainer.loss,
        "lambda": trainer.lambda,
        "schedule": schedule,
        "m_hat": meta.max_sq_norm,
        "dim": meta.dim,
        "bias": data.bias,
        "t0": outcome.avg_start,
        "warmup": trainer.warmup,
        "passes": trainer.passes,
        "seed": cfg.seed,
        "samples": outcome.samples_seen,
    });

    if let Some(path) = &cfg.output.metrics {
        write_metrics_csv(&resolve_output(path), &header, &outcome.records)?;
    }
    if let Some(path) = &cfg.output.metrics_json {
        write_metrics_json(&resolve_output(path), &header, &outcome.records)?;
    }
    if let Some(path) = &cfg.output.model {
        let snapshot = ModelSnapshot {
            version: env!("CARGO_PKG_VERSION").into(),
            dim: meta.dim,
            loss: trainer.loss,
            lambda: trainer.lambda,
            schedule,
            bias: data.bias,
            label_map: data.label_map.clone(),
            seed: cfg.seed,
            max_sq_norm: meta.max_sq_norm,
            avg_start: outcome.avg_start,
            theta: outcome.theta.weights().to_vec(),
            theta_bar: outcome.theta_bar.weights().to_vec(),
        };
        snapshot.save(&resolve_output(path))?;
    }

    println!("{header}");
    for (which, record) in outcome
        .records
        .iter()
        .filter(|(_, r)| r.step == outcome.samples_seen)
    {
        println!(
            "{}",
            serde_json::json!({
                "model": which.as_str(),
                "step": record.step,
                "error_rate": record.test_error_rate,
                "cost": record.test_cost,
            })
        );
    }
    Ok(0)
}
