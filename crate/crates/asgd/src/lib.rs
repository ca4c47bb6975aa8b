//! One-pass training of linear models by averaged stochastic gradient
//! descent (ASGD).
//!
//! The trainer keeps a running average of the SGD iterates in a scaled
//! representation so that each step costs O(nnz) on sparse data, decides on
//! the fly when averaging should begin, and pairs the whole thing with a
//! curvature-matched learning-rate schedule. A small verification lab
//! simulates the matching linear stochastic-approximation process and checks
//! the finite-sample error bounds the trainer is designed around, plus the
//! synthetic problems used to compare schedules.

pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod instrument;
pub mod loss;
pub mod model;
pub mod schedule;
pub mod sparse;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
pub use loss::LossKind;
pub use model::{LinearModel, MetricsRecord, WhichModel};
pub use schedule::{BoundParams, Schedule};
pub use sparse::{Sample, SparseVector};
pub use trainer::{
    train_one_pass, Algorithm, AsgdState, AveragingStart, CheckpointSpec, SgdState, TrainOutcome,
    TrainerConfig,
};
