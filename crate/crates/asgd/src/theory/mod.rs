//! Numerical verification lab.
//!
//! Small dense simulations that check the error bounds and stability claims
//! the trainers rely on: the linear stochastic-approximation process and its
//! averaged-iterate bound, the PSD sandwich on the schedule's step-sum
//! matrices, the constant-rate divergence threshold, the gradient-fluctuation
//! bound for squared loss, and the two synthetic problems used to compare
//! schedules. Everything here is verification-scale: dense storage, exact
//! eigendecompositions, replicate-parallel Monte Carlo with deterministic
//! per-replicate seeds.

mod divergence;
mod experiments;
mod fluctuation;
mod linear_sa;
mod stepsum;
mod synthetic;

pub use divergence::{check_divergence, DivergenceOutcome};
pub use experiments::{run_quadratic_toy, run_regression_toy, ArmTrajectory};
pub use fluctuation::{
    check_fluctuation_bound, random_thetas, FluctuationReport, FluctuationRow,
};
pub use linear_sa::{
    run_linear_sa, run_linear_sa_at, verify_averaged_bound, BoundCheckpoint, BoundReport,
    GaussianNoise, LinearSaConfig, NoNoise, NoiseSource,
};
pub use stepsum::{
    check_step_sum_bounds, random_admissible_case, step_product, weighted_step_sum,
    SandwichOutcome,
};
pub use synthetic::{
    batch_least_squares, batch_mean, LeastSquares, ProblemKind, SyntheticProblem,
};
