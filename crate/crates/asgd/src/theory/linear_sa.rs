//! The linear stochastic-approximation process
//! θ_t = θ_{t−1} − γ_t(Aθ_{t−1} − b + ξ_t) with its running average, and a
//! Monte-Carlo check of the finite-sample bound on the averaged iterate.

use crate::error::{Error, Result};
use crate::schedule::{BoundParams, Schedule};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

/// Largest allowed asymmetry in supplied matrices.
const SYMMETRY_TOL: f64 = 1e-12;

/// Floating-point slack in the pass rule, so degenerate cases (estimate and
/// bound both ~0 up to rounding) compare sanely. Far below any real signal.
const PASS_SLACK: f64 = 1e-9;

/// Noise feeding the process. Implementations may inspect the current
/// iterate, which is how the gradient-residual construction used for
/// cross-checking against the generic trainer closes the loop.
pub trait NoiseSource {
    fn sample(&mut self, rng: &mut ChaCha8Rng, theta: &DVector<f64>) -> DVector<f64>;
}

/// ξ = F·z with z standard normal, so cov(ξ) = F Fᵀ.
#[derive(Clone, Debug)]
pub struct GaussianNoise {
    factor: DMatrix<f64>,
}

impl GaussianNoise {
    pub fn from_factor(factor: DMatrix<f64>) -> Self {
        Self { factor }
    }

    /// Symmetric square root of a PSD covariance.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        check_symmetric(cov, "noise covariance")?;
        let eig = cov.clone().symmetric_eigen();
        for &v in eig.eigenvalues.iter() {
            if v < -1e-10 {
                return Err(Error::Contract(format!(
                    "noise covariance has negative eigenvalue {v}"
                )));
            }
        }
        let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        let factor = &eig.eigenvectors * sqrt * eig.eigenvectors.transpose();
        Ok(Self { factor })
    }
}

impl NoiseSource for GaussianNoise {
    fn sample(&mut self, rng: &mut ChaCha8Rng, _theta: &DVector<f64>) -> DVector<f64> {
        let z = DVector::from_fn(self.factor.ncols(), |_, _| rng.sample(StandardNormal));
        &self.factor * z
    }
}

/// ξ ≡ 0.
pub struct NoNoise;

impl NoiseSource for NoNoise {
    fn sample(&mut self, _rng: &mut ChaCha8Rng, theta: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(theta.len())
    }
}

/// Configuration of one linear process: the SPD curvature matrix, the target
/// vector (the process settles at A⁻¹b), the noise covariance, the start
/// point, the schedule, and the base RNG seed.
#[derive(Clone, Debug)]
pub struct LinearSaConfig {
    pub matrix: DMatrix<f64>,
    pub target: DVector<f64>,
    pub noise_cov: DMatrix<f64>,
    pub theta0: DVector<f64>,
    pub schedule: Schedule,
    pub seed: u64,
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Contract(format!("{what} must be square")));
    }
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::Contract(format!(
                    "{what} is not symmetric within {SYMMETRY_TOL}"
                )));
            }
        }
    }
    Ok(())
}

impl LinearSaConfig {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        check_symmetric(&self.matrix, "curvature matrix")?;
        check_symmetric(&self.noise_cov, "noise covariance")?;
        let d = self.dim();
        if self.target.len() != d || self.theta0.len() != d || self.noise_cov.nrows() != d {
            return Err(Error::Contract(
                "curvature, target, noise and start dimensions disagree".into(),
            ));
        }
        let (lambda_min, _) = self.eigen_range()?;
        if lambda_min <= 0.0 {
            return Err(Error::Contract(format!(
                "curvature matrix must be positive definite, smallest eigenvalue {lambda_min}"
            )));
        }
        Ok(())
    }

    /// Exact (λ_min, λ_max) of the curvature matrix.
    pub fn eigen_range(&self) -> Result<(f64, f64)> {
        check_symmetric(&self.matrix, "curvature matrix")?;
        let eig = self.matrix.clone().symmetric_eigen();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in eig.eigenvalues.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }

    /// The fixed point A⁻¹b.
    pub fn theta_star(&self) -> Result<DVector<f64>> {
        let chol = self
            .matrix
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numeric("curvature matrix is not positive definite".into()))?;
        Ok(chol.solve(&self.target))
    }

    /// Bound inputs computed exactly from the configuration: the eigen range,
    /// tr(A⁻¹S) and ‖θ0 − θ*‖²_{A⁻¹}. Fails when the schedule is not
    /// admissible for this matrix.
    pub fn bound_params(&self) -> Result<BoundParams> {
        self.validate()?;
        let (lambda_min, lambda_max) = self.eigen_range()?;
        let chol = self
            .matrix
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numeric("curvature matrix is not positive definite".into()))?;
        let noise_trace = (0..self.dim())
            .map(|j| chol.solve(&self.noise_cov.column(j).into_owned())[j])
            .sum();
        let delta0 = &self.theta0 - self.theta_star()?;
        let init_error_sq = delta0.dot(&chol.solve(&delta0));
        BoundParams::new(
            lambda_min,
            lambda_max,
            noise_trace,
            init_error_sq,
            self.schedule,
        )
    }

    pub fn default_noise(&self) -> Result<GaussianNoise> {
        GaussianNoise::from_covariance(&self.noise_cov)
    }

    /// Standard verification instance: a random SPD curvature matrix with
    /// log-spaced eigenvalues in [1/condition, 1] under a random rotation,
    /// identity noise, a random unit fixed point, θ0 = 0, and the
    /// curvature-matched schedule (γ0 = 1/λ_max, a = λ_min, c = 2/3).
    pub fn random_verification(dim: usize, condition: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gaussian = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = gaussian.qr().q();
        let eigenvalues = DVector::from_fn(dim, |i, _| {
            let frac = if dim > 1 { i as f64 / (dim - 1) as f64 } else { 0.0 };
            // log-spaced from 1/condition up to 1
            (1.0 / condition).powf(1.0 - frac)
        });
        let matrix = &q * DMatrix::from_diagonal(&eigenvalues) * q.transpose();
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        let mut theta_star = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        theta_star /= theta_star.norm();
        let lambda_min = 1.0 / condition;
        let schedule = Schedule::new(1.0, lambda_min, 2.0 / 3.0)?;
        let cfg = Self {
            target: &matrix * theta_star,
            matrix,
            noise_cov: DMatrix::identity(dim, dim),
            theta0: DVector::zeros(dim),
            schedule,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn advance(
    cfg: &LinearSaConfig,
    theta: &mut DVector<f64>,
    noise: &mut dyn NoiseSource,
    rng: &mut ChaCha8Rng,
    t: u64,
) -> Result<()> {
    let gamma = cfg.schedule.rate(t);
    let xi = noise.sample(rng, theta);
    let drift = &cfg.matrix * &*theta - &cfg.target + xi;
    theta.axpy(-gamma, &drift, 1.0);
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { step: t });
    }
    Ok(())
}

/// Full trajectory of (θ_t, θ̄_t) for t = 1..=steps, with θ̄ the running mean
/// of θ_1..θ_t and the default Gaussian noise. Verification-scale only: every
/// step is materialized.
pub fn run_linear_sa(
    cfg: &LinearSaConfig,
    steps: u64,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    let checkpoints: Vec<u64> = (1..=steps).collect();
    let mut noise = cfg.default_noise()?;
    let out = run_linear_sa_at(cfg, &mut noise, &checkpoints)?;
    Ok(out.into_iter().map(|(_, th, bar)| (th, bar)).collect())
}

/// Runs the process recording (θ, θ̄) at the given checkpoint steps only.
/// Checkpoints must be sorted and positive; the run stops at the last one.
pub fn run_linear_sa_at(
    cfg: &LinearSaConfig,
    noise: &mut dyn NoiseSource,
    checkpoints: &[u64],
) -> Result<Vec<(u64, DVector<f64>, DVector<f64>)>> {
    cfg.validate()?;
    if checkpoints.is_empty() {
        return Err(Error::Contract("at least one checkpoint step required".into()));
    }
    if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract(
            "checkpoints must be strictly increasing and >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = cfg.theta0.clone();
    let mut mean = DVector::zeros(cfg.dim());
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0usize;
    let last = *checkpoints.last().unwrap();
    for t in 1..=last {
        advance(cfg, &mut theta, noise, &mut rng, t)?;
        // Running mean of θ_1..θ_t.
        let weight = 1.0 / t as f64;
        mean.axpy(weight, &theta, 1.0 - weight);
        if checkpoints[next] == t {
            out.push((t, theta.clone(), mean.clone()));
            next += 1;
        }
    }
    Ok(out)
}

/// One checkpoint of the bound check.
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheckpoint {
    pub step: u64,
    /// Monte-Carlo estimate of t·E‖θ̄_t − θ*‖²_A.
    pub estimate: f64,
    pub std_error: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub replicates: u64,
    pub checkpoints: Vec<BoundCheckpoint>,
    pub pass: bool,
}

/// Estimates t·E‖θ̄_t − θ*‖²_A over independent replicates (replicate i uses
/// seed `cfg.seed ^ i`) and checks `estimate − 2·stderr ≤ bound` at every
/// checkpoint. Replicates run in parallel; aggregation order is fixed, so
/// the report is bitwise reproducible for a given seed.
pub fn verify_averaged_bound(
    cfg: &LinearSaConfig,
    replicates: u64,
    checkpoints: &[u64],
) -> Result<BoundReport> {
    let params = cfg.bound_params()?;
    if replicates < 2 {
        return Err(Error::Contract("need at least 2 replicates".into()));
    }
    let theta_star = cfg.theta_star()?;
    let noise = cfg.default_noise()?;

    let per_replicate: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut replicate_cfg = cfg.clone();
            replicate_cfg.seed = cfg.seed ^ i;
            let mut source = noise.clone();
            let traj = run_linear_sa_at(&replicate_cfg, &mut source, checkpoints)?;
            Ok(traj
                .into_iter()
                .map(|(t, _, bar)| {
                    let delta = bar - &theta_star;
                    t as f64 * delta.dot(&(&cfg.matrix * &delta))
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let n = replicates as f64;
    let mut rows = Vec::with_capacity(checkpoints.len());
    for (k, &step) in checkpoints.iter().enumerate() {
        let mean = per_replicate.iter().map(|v| v[k]).sum::<f64>() / n;
        let var = per_replicate
            .iter()
            .map(|v| (v[k] - mean) * (v[k] - mean))
            .sum::<f64>()
            / (n - 1.0);
        let std_error = (var / n).sqrt();
        let bound = params.averaged_error_bound(step)?;
        rows.push(BoundCheckpoint {
            step,
            estimate: mean,
            std_error,
            bound,
            pass: mean - 2.0 * std_error <= bound + PASS_SLACK * (1.0 + bound),
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(BoundReport {
        replicates,
        checkpoints: rows,
        pass,
    })
}
