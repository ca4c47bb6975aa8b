//! Held-out evaluation of trained models.

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::model::LinearModel;
use crate::sparse::Sample;
use serde::Serialize;

/// Error rate and mean cost of a model over a sample set.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EvalSummary {
    /// Only present for classification losses. A score of exactly 0 counts
    /// as an error (conservative tie handling).
    pub error_rate: Option<f64>,
    /// Mean loss plus (λ/2)‖θ‖².
    pub mean_cost: f64,
    pub n: u64,
}

pub fn evaluate_model(
    model: &LinearModel,
    samples: &[Sample],
    loss: LossKind,
    lambda: f64,
) -> Result<EvalSummary> {
    if samples.is_empty() {
        return Err(Error::Data("empty evaluation set".into()));
    }
    let mut total_loss = 0.0f64;
    let mut errors = 0u64;
    for sample in samples {
        let score = model.score(&sample.features)?;
        total_loss += loss.value(score, sample.label)?;
        if sample.label * score <= 0.0 {
            errors += 1;
        }
    }
    let n = samples.len() as u64;
    let regularizer = 0.5 * lambda * model.squared_norm();
    Ok(EvalSummary {
        error_rate: loss
            .is_classification()
            .then(|| errors as f64 / n as f64),
        mean_cost: total_loss / n as f64 + regularizer,
        n,
    })
}
