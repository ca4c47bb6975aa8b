//! Step-product matrices of the schedule and the PSD sandwich that controls
//! the averaged iterate: with X_j^t = Π_{i=j}^t (I − γ_i A) and
//! X̄_j^t = γ_j Σ_{i=j}^t X_{j+1}^i,
//!
//!   (I − X_j^t)A⁻¹ ⪯ X̄_j^t ⪯ (1 + c0(1 + a·γ0·j)^{c−1})A⁻¹.
//!
//! Everything is built by direct product accumulation at small dimension.

use crate::error::{Error, Result};
use crate::schedule::{BoundParams, Schedule};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// These helpers materialize dense products step by step.
const MAX_DIM: usize = 16;

/// Eigenvalue slack when declaring a difference PSD.
const PSD_TOL: f64 = 1e-10;

fn check_dim(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Contract("matrix must be square".into()));
    }
    if a.nrows() > MAX_DIM {
        return Err(Error::Contract(format!(
            "step-sum helpers are verification-scale: dim {} > {MAX_DIM}",
            a.nrows()
        )));
    }
    Ok(())
}

/// X_j^t = Π_{i=j}^t (I − γ_i A); the empty product (j > t) is I.
pub fn step_product(a: &DMatrix<f64>, schedule: &Schedule, j: u64, t: u64) -> Result<DMatrix<f64>> {
    check_dim(a)?;
    let d = a.nrows();
    let mut product = DMatrix::identity(d, d);
    if j <= t {
        for i in j..=t {
            let factor = DMatrix::identity(d, d) - a * schedule.rate(i);
            product = factor * product;
        }
    }
    Ok(product)
}

/// X̄_j^t = γ_j Σ_{i=j}^t X_{j+1}^i. Requires j ≤ t.
pub fn weighted_step_sum(
    a: &DMatrix<f64>,
    schedule: &Schedule,
    j: u64,
    t: u64,
) -> Result<DMatrix<f64>> {
    check_dim(a)?;
    if j > t {
        return Err(Error::Contract(format!(
            "weighted step sum needs j <= t, got j = {j}, t = {t}"
        )));
    }
    let d = a.nrows();
    // i = j contributes the empty product X_{j+1}^j = I.
    let mut partial = DMatrix::identity(d, d);
    let mut sum = partial.clone();
    for i in (j + 1)..=t {
        let factor = DMatrix::identity(d, d) - a * schedule.rate(i);
        partial = factor * partial;
        sum += &partial;
    }
    Ok(sum * schedule.rate(j))
}

/// Random admissible sandwich case: SPD matrix of dimension 1..=8 with
/// eigenvalues in [0.1, 1] under a random rotation, a schedule built to
/// satisfy both bound hypotheses, and 0 ≤ j ≤ t ≤ 500.
pub fn random_admissible_case(seed: u64) -> (DMatrix<f64>, Schedule, u64, u64) {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_distr::StandardNormal;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=8usize);
    let gaussian = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = gaussian.qr().q();
    let eigenvalues = DVector::from_fn(d, |_, _| rng.random_range(0.1..=1.0));
    let lambda_min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda_max = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let a_mat = &q * DMatrix::from_diagonal(&eigenvalues) * q.transpose();
    let a_mat = (&a_mat + a_mat.transpose()) * 0.5;

    let gamma0 = rng.random_range(0.3..=1.0) / lambda_max;
    let exponent: f64 = rng.random_range(0.0..=1.0);
    let decay = if exponent > 0.5 {
        rng.random_range(0.0..0.95) * lambda_min / (2.0 * exponent - 1.0)
    } else {
        rng.random_range(0.0..3.0)
    };
    let schedule = Schedule::new(gamma0, decay, exponent).expect("constructed valid");
    let t = rng.random_range(1..=500u64);
    let j = rng.random_range(0..=t);
    (a_mat, schedule, j, t)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SandwichOutcome {
    /// Smallest eigenvalue of X̄_j^t − (I − X_j^t)A⁻¹.
    pub lower_min_eig: f64,
    /// Smallest eigenvalue of (1 + c0(1 + a·γ0·j)^{c−1})A⁻¹ − X̄_j^t.
    pub upper_min_eig: f64,
    pub pass: bool,
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    // Symmetrize away floating-point asymmetry before the eigensolve.
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    eig.eigenvalues.iter().fold(f64::INFINITY, |lo, &v| lo.min(v))
}

/// Checks both sandwich inequalities by smallest eigenvalue (≥ −1e-10).
/// Rejects schedules that are inadmissible for this matrix before touching
/// any products.
pub fn check_step_sum_bounds(
    a: &DMatrix<f64>,
    schedule: &Schedule,
    j: u64,
    t: u64,
) -> Result<SandwichOutcome> {
    check_dim(a)?;
    if j > t {
        return Err(Error::Contract(format!(
            "sandwich check needs j <= t, got j = {j}, t = {t}"
        )));
    }
    let eig = a.clone().symmetric_eigen();
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lambda_min <= 0.0 {
        return Err(Error::Contract(
            "sandwich check requires a positive-definite matrix".into(),
        ));
    }
    let params = BoundParams::new(lambda_min, lambda_max, 0.0, 0.0, *schedule)?;
    let correction = params.correction_coef()?;

    let inv = {
        let inv_diag = DMatrix::from_diagonal(&DVector::from_iterator(
            a.nrows(),
            eig.eigenvalues.iter().map(|&v| 1.0 / v),
        ));
        &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose()
    };

    let step_sum = weighted_step_sum(a, schedule, j, t)?;
    let product = step_product(a, schedule, j, t)?;
    let d = a.nrows();

    let lower = &step_sum - (DMatrix::identity(d, d) - product) * &inv;
    let factor = 1.0
        + correction
            * (1.0 + schedule.decay() * schedule.gamma0() * j as f64)
                .powf(schedule.exponent() - 1.0);
    let upper = inv * factor - &step_sum;

    let lower_min_eig = min_eigenvalue(&lower);
    let upper_min_eig = min_eigenvalue(&upper);
    Ok(SandwichOutcome {
        lower_min_eig,
        upper_min_eig,
        pass: lower_min_eig >= -PSD_TOL && upper_min_eig >= -PSD_TOL,
    })
}
