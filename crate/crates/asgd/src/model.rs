//! Dense linear models and per-checkpoint metrics rows.

use crate::error::{Error, Result};
use crate::instrument;
use crate::sparse::SparseVector;
use serde::{Deserialize, Serialize};

/// Dense weights for the linear predictor f(x) = θᵀx. There is no bias term;
/// ingestion can append a constant feature instead.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    weights: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
        }
    }

    /// Validates that every entry is finite.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite {
                what: "model weight",
            });
        }
        Ok(Self { weights })
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, x: &SparseVector) -> Result<f64> {
        x.dot(&self.weights)
    }

    pub fn squared_norm(&self) -> f64 {
        instrument::add_touches(self.weights.len());
        self.weights.iter().map(|w| w * w).sum()
    }
}

/// Which trained model a metrics row describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhichModel {
    /// The last iterate.
    Theta,
    /// The averaged iterate.
    ThetaBar,
}

impl WhichModel {
    pub fn as_str(self) -> &'static str {
        match self {
            WhichModel::Theta => "theta",
            WhichModel::ThetaBar => "theta_bar",
        }
    }
}

impl std::fmt::Display for WhichModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One evaluation checkpoint of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    /// Fraction of passes over the data completed at this step.
    pub passes: f64,
    /// Absent for regression losses.
    pub test_error_rate: Option<f64>,
    pub test_cost: f64,
    /// Only available when the generating problem is known.
    pub excess_risk: Option<f64>,
    /// Wall-clock time since training started. Everything else in a record
    /// is deterministic for a fixed stream, config and seed; this field is not.
    pub elapsed_seconds: f64,
}
