//! Constant-rate stability probe for squared loss.
//!
//! On a regression stream whose features all satisfy ‖x‖² = M exactly, SGD
//! with a constant rate above 2/M blows up; below it, the iterate stays
//! bounded. This runs the actual recursion and reports which happened.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// ‖θ‖ beyond this counts as divergence.
const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DivergenceOutcome {
    pub diverged: bool,
    /// Steps actually executed (stops early once the norm is out).
    pub steps: u64,
    pub max_norm: f64,
}

/// Runs SGD with constant rate `gamma` on y = θ*ᵀx + ε with x uniform on the
/// sphere of radius √M and ε standard normal. Divergence means ‖θ‖ > 1e6
/// (or a non-finite iterate) within `steps`.
pub fn check_divergence(
    max_sq_norm: f64,
    gamma: f64,
    steps: u64,
    dim: usize,
    seed: u64,
) -> DivergenceOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = max_sq_norm.sqrt();
    let theta_star = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    let mut theta = DVector::<f64>::zeros(dim);
    let mut max_norm = 0.0f64;
    for t in 1..=steps {
        let mut x = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = x.norm();
        if norm < 1e-12 {
            continue; // a zero draw has no direction; practically unreachable
        }
        x *= radius / norm;
        let noise: f64 = rng.sample(StandardNormal);
        let y = theta_star.dot(&x) + noise;
        let residual = theta.dot(&x) - y;
        theta.axpy(-gamma * residual, &x, 1.0);
        let theta_norm = theta.norm();
        max_norm = max_norm.max(theta_norm);
        if !theta_norm.is_finite() || theta_norm > DIVERGENCE_NORM {
            return DivergenceOutcome {
                diverged: true,
                steps: t,
                max_norm,
            };
        }
    }
    DivergenceOutcome {
        diverged: false,
        steps,
        max_norm,
    }
}
