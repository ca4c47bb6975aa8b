//! Run configuration: JSON config file, named presets, and flag overrides.

use anyhow::{bail, Context};
use asgd::ingest::LabelMap;
use asgd::trainer::{Algorithm, DEFAULT_WARMUP};
use asgd::{LossKind, Schedule};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ASGD_OUT_DIR";

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub trainer: TrainerBlock,
    #[serde(default)]
    pub eval: EvalBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub bias: bool,
    #[serde(default)]
    pub label_map: LabelMap,
    #[serde(default = "default_m_prefix")]
    pub m_prefix: usize,
}

fn default_m_prefix() -> usize {
    1000
}

impl DataConfig {
    pub fn new(path: PathBuf) -> Self {
        Self {
            path,
            dim: None,
            bias: false,
            label_map: LabelMap::Passthrough,
            m_prefix: default_m_prefix(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerBlock {
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default)]
    pub lambda: f64,
    /// "auto" resolves γ0 = 1/M̂ from the data with a = λ and the
    /// loss-dependent exponent; or give the (gamma0, a, c) triple.
    #[serde(default)]
    pub schedule: ScheduleChoice,
    /// Fixed averaging start; absent means loss-comparison detection.
    #[serde(default)]
    pub t0: Option<u64>,
    #[serde(default = "default_warmup")]
    pub warmup: u64,
    #[serde(default = "default_passes")]
    pub passes: u32,
    #[serde(default)]
    pub checkpoints: CheckpointChoice,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Asgd
}

fn default_loss() -> LossKind {
    LossKind::SquaredHinge
}

fn default_warmup() -> u64 {
    DEFAULT_WARMUP
}

fn default_passes() -> u32 {
    1
}

impl Default for TrainerBlock {
    fn default() -> Self {
        Self {
            algorithm: default_algorithm(),
            loss: default_loss(),
            lambda: 0.0,
            schedule: ScheduleChoice::default(),
            t0: None,
            warmup: default_warmup(),
            passes: default_passes(),
            checkpoints: CheckpointChoice::default(),
        }
    }
}

/// Either the literal string "auto" or an explicit (gamma0, a, c) object.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleChoiceRepr", into = "ScheduleChoiceRepr")]
pub enum ScheduleChoice {
    #[default]
    Auto,
    Fixed(Schedule),
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ScheduleChoiceRepr {
    Tag(String),
    Fixed(Schedule),
}

impl TryFrom<ScheduleChoiceRepr> for ScheduleChoice {
    type Error = String;

    fn try_from(repr: ScheduleChoiceRepr) -> Result<Self, String> {
        match repr {
            ScheduleChoiceRepr::Tag(tag) if tag == "auto" => Ok(ScheduleChoice::Auto),
            ScheduleChoiceRepr::Tag(tag) => Err(format!(
                "expected \"auto\" or a schedule object, got {tag:?}"
            )),
            ScheduleChoiceRepr::Fixed(s) => Ok(ScheduleChoice::Fixed(s)),
        }
    }
}

impl From<ScheduleChoice> for ScheduleChoiceRepr {
    fn from(choice: ScheduleChoice) -> Self {
        match choice {
            ScheduleChoice::Auto => ScheduleChoiceRepr::Tag("auto".into()),
            ScheduleChoice::Fixed(s) => ScheduleChoiceRepr::Fixed(s),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointChoice {
    /// One final record per model.
    Final,
    /// Log-spaced points per pass.
    Geometric(u32),
    /// Explicit step numbers.
    Steps(Vec<u64>),
}

impl Default for CheckpointChoice {
    fn default() -> Self {
        CheckpointChoice::Geometric(20)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalBlock {
    #[serde(default)]
    pub test_path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Metrics CSV path.
    #[serde(default)]
    pub metrics: Option<PathBuf>,
    /// Optional JSON mirror of the metrics rows.
    #[serde(default)]
    pub metrics_json: Option<PathBuf>,
    /// Model snapshot path.
    #[serde(default)]
    pub model: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }
}

/// Resolves an output path against `ASGD_OUT_DIR` when it is relative.
pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir).join(path),
        None => path.to_path_buf(),
    }
}

/// Benchmark-table presets: regularization, reported max squared norm, the
/// averaging start where one was published, and the loss those runs used.
/// Data files are user-supplied.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub lambda: f64,
    pub max_sq_norm: f64,
    pub t0: Option<u64>,
    pub loss: LossKind,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "covtype", lambda: 1e-6, max_sq_norm: 6.8, t0: Some(100), loss: LossKind::SquaredHinge },
    Preset { name: "delta", lambda: 1e-2, max_sq_norm: 3.8e3, t0: Some(100), loss: LossKind::SquaredHinge },
    Preset { name: "rcv1", lambda: 1e-5, max_sq_norm: 1.0, t0: Some(781), loss: LossKind::SquaredHinge },
    Preset { name: "mnist9", lambda: 1e-3, max_sq_norm: 2.1e4, t0: Some(128), loss: LossKind::SquaredHinge },
    Preset { name: "alpha", lambda: 1e-5, max_sq_norm: 1.0, t0: None, loss: LossKind::SquaredHinge },
    Preset { name: "beta", lambda: 1e-4, max_sq_norm: 1.0, t0: None, loss: LossKind::SquaredHinge },
    Preset { name: "gamma", lambda: 1e-3, max_sq_norm: 2.5e3, t0: None, loss: LossKind::SquaredHinge },
    Preset { name: "epsilon", lambda: 1e-5, max_sq_norm: 1.0, t0: None, loss: LossKind::SquaredHinge },
    Preset { name: "zeta", lambda: 1e-5, max_sq_norm: 1.0, t0: None, loss: LossKind::SquaredHinge },
    Preset { name: "fd", lambda: 1e-5, max_sq_norm: 1.0, t0: None, loss: LossKind::SquaredHinge },
    Preset { name: "ocr", lambda: 1e-5, max_sq_norm: 1.0, t0: None, loss: LossKind::SquaredHinge },
    Preset { name: "dna", lambda: 1e-3, max_sq_norm: 200.0, t0: None, loss: LossKind::SquaredHinge },
];

pub fn find_preset(name: &str) -> anyhow::Result<&'static Preset> {
    match PRESETS.iter().find(|p| p.name == name) {
        Some(p) => Ok(p),
        None => {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            bail!("unknown preset {name:?}; available: {}", names.join(", "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_choice_parses_both_forms() {
        let auto: ScheduleChoice = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(auto, ScheduleChoice::Auto);
        let fixed: ScheduleChoice =
            serde_json::from_str(r#"{"gamma0": 0.5, "a": 0.01, "c": 0.75}"#).unwrap();
        match fixed {
            ScheduleChoice::Fixed(s) => {
                assert_eq!(s.gamma0(), 0.5);
                assert_eq!(s.decay(), 0.01);
                assert_eq!(s.exponent(), 0.75);
            }
            ScheduleChoice::Auto => panic!("expected fixed schedule"),
        }
        assert!(serde_json::from_str::<ScheduleChoice>("\"automatic\"").is_err());
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"{
            "seed": 7,
            "data": {"path": "train.libsvm", "bias": true,
                     "label_map": {"binary": {"positive": [2.0]}}},
            "trainer": {"loss": "l2svm", "lambda": 1e-6, "schedule": "auto",
                        "t0": 100, "checkpoints": {"geometric": 20}},
            "eval": {"test_path": "test.libsvm"},
            "output": {"metrics": "metrics.csv"}
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.trainer.t0, Some(100));
        assert_eq!(cfg.trainer.lambda, 1e-6);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.trainer.t0, Some(100));
    }

    #[test]
    fn presets_resolve() {
        let p = find_preset("covtype").unwrap();
        assert_eq!(p.lambda, 1e-6);
        assert_eq!(p.max_sq_norm, 6.8);
        assert_eq!(p.t0, Some(100));
        assert!(find_preset("nope").is_err());
    }
}
