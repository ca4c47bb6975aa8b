//! Model snapshot files: everything needed to reproduce an evaluation.

use anyhow::Context;
use asgd::ingest::LabelMap;
use asgd::{LossKind, Schedule};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub version: String,
    /// Trained dimensionality, bias included.
    pub dim: usize,
    pub loss: LossKind,
    pub lambda: f64,
    pub schedule: Schedule,
    pub bias: bool,
    pub label_map: LabelMap,
    pub seed: u64,
    pub max_sq_norm: f64,
    pub avg_start: Option<u64>,
    pub theta: Vec<f64>,
    pub theta_bar: Vec<f64>,
}

impl ModelSnapshot {
    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)
            .with_context(|| format!("writing model snapshot {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading model snapshot {}", path.display()))?;
        let snapshot = serde_json::from_str(&text)
            .with_context(|| format!("parsing model snapshot {}", path.display()))?;
        Ok(snapshot)
    }
}
