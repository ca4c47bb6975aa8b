//! The two synthetic problems used to study schedules, plus the exact batch
//! estimators they are compared against.
//!
//! Both problems have a diagonal curvature matrix, so sampling and excess
//! risk are O(d).

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gram-matrix condition number beyond which the least-squares solve adds a
/// small ridge.
const GRAM_CONDITION_LIMIT: f64 = 1e12;
const GRAM_RIDGE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    /// min E (θ − x)ᵀA(θ − x) with x standard normal; θ* = 0 and the excess
    /// risk is θᵀAθ.
    QuadraticToy,
    /// y = xᵀθ* + ε with x ~ N(0, A), ε standard normal; θ* is all ones and
    /// the excess risk is ½(θ − θ*)ᵀA(θ − θ*).
    RegressionToy,
}

/// A synthetic problem with diagonal curvature A = diag(eigenvalues).
#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    pub kind: ProblemKind,
    eigenvalues: Vec<f64>,
    theta_star: DVector<f64>,
    noise_variance: f64,
}

impl SyntheticProblem {
    /// 100 dimensions, eigenvalues [1, 1, 1, 0.02, ..., 0.02].
    pub fn quadratic_toy() -> Self {
        let mut eigenvalues = vec![0.02; 100];
        eigenvalues[..3].fill(1.0);
        Self {
            kind: ProblemKind::QuadraticToy,
            theta_star: DVector::zeros(eigenvalues.len()),
            eigenvalues,
            noise_variance: 1.0,
        }
    }

    /// 100 dimensions, eigenvalues evenly spread from 0.01 to 1, θ* all ones,
    /// unit noise variance.
    pub fn regression_toy() -> Self {
        let d = 100usize;
        let eigenvalues: Vec<f64> = (0..d)
            .map(|i| 0.01 + (1.0 - 0.01) * i as f64 / (d - 1) as f64)
            .collect();
        Self {
            kind: ProblemKind::RegressionToy,
            theta_star: DVector::from_element(d, 1.0),
            eigenvalues,
            noise_variance: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues))
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Default initial rate: 1 for the quadratic toy, 1/tr(A) for the
    /// regression toy.
    pub fn default_gamma0(&self) -> f64 {
        match self.kind {
            ProblemKind::QuadraticToy => 1.0,
            ProblemKind::RegressionToy => 1.0 / self.trace(),
        }
    }

    /// Excess risk of a weight vector over θ*.
    pub fn excess_risk(&self, theta: &[f64]) -> f64 {
        match self.kind {
            ProblemKind::QuadraticToy => theta
                .iter()
                .zip(&self.eigenvalues)
                .map(|(&w, &l)| l * w * w)
                .sum(),
            ProblemKind::RegressionToy => {
                0.5 * theta
                    .iter()
                    .zip(self.theta_star.iter())
                    .zip(&self.eigenvalues)
                    .map(|((&w, &s), &l)| l * (w - s) * (w - s))
                    .sum::<f64>()
            }
        }
    }

    /// One feature draw: standard normal for the quadratic toy, N(0, A) for
    /// the regression toy.
    pub fn sample_x(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        match self.kind {
            ProblemKind::QuadraticToy => {
                DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal))
            }
            ProblemKind::RegressionToy => DVector::from_fn(self.dim(), |i, _| {
                self.eigenvalues[i].sqrt() * rng.sample::<f64, _>(StandardNormal)
            }),
        }
    }

    /// One labeled draw y = xᵀθ* + ε.
    pub fn sample_labeled(&self, rng: &mut ChaCha8Rng) -> (DVector<f64>, f64) {
        let x = self.sample_x(rng);
        let noise: f64 = rng.sample::<f64, _>(StandardNormal);
        let y = self.theta_star.dot(&x) + self.noise_variance.sqrt() * noise;
        (x, y)
    }
}

/// Exact batch mean of the samples.
pub fn batch_mean(xs: &[DVector<f64>]) -> Result<DVector<f64>> {
    let first = xs
        .first()
        .ok_or_else(|| Error::Data("batch mean of an empty sample set".into()))?;
    let mut sum = DVector::zeros(first.len());
    for x in xs {
        sum += x;
    }
    Ok(sum / xs.len() as f64)
}

/// Incremental normal equations: θ̂ = (Σ x xᵀ)⁻¹ Σ x y.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    count: u64,
}

impl LeastSquares {
    pub fn new(dim: usize) -> Self {
        Self {
            gram: DMatrix::zeros(dim, dim),
            moment: DVector::zeros(dim),
            count: 0,
        }
    }

    pub fn add(&mut self, x: &DVector<f64>, y: f64) {
        self.gram.ger(1.0, x, x, 1.0);
        self.moment.axpy(y, x, 1.0);
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Solves the normal equations, adding a 1e-10 ridge when the Gram matrix
    /// is ill-conditioned (condition number above 1e12, singular included).
    pub fn solve(&self) -> Result<DVector<f64>> {
        if self.count == 0 {
            return Err(Error::Data("least squares with no samples".into()));
        }
        let eig = self.gram.clone().symmetric_eigen();
        let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ill = lo <= 0.0 || hi / lo > GRAM_CONDITION_LIMIT;
        let gram = if ill {
            let mut g = self.gram.clone();
            for i in 0..g.nrows() {
                g[(i, i)] += GRAM_RIDGE;
            }
            g
        } else {
            self.gram.clone()
        };
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Numeric("Gram matrix singular even after ridge".into()))?;
        Ok(chol.solve(&self.moment))
    }
}

/// One-shot least squares over a sample set.
pub fn batch_least_squares(xs: &[DVector<f64>], ys: &[f64]) -> Result<DVector<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::Contract("xs and ys lengths differ".into()));
    }
    let first = xs
        .first()
        .ok_or_else(|| Error::Data("least squares with no samples".into()))?;
    let mut acc = LeastSquares::new(first.len());
    for (x, &y) in xs.iter().zip(ys) {
        acc.add(x, y);
    }
    acc.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn quadratic_toy_shape() {
        let p = SyntheticProblem::quadratic_toy();
        assert_eq!(p.dim(), 100);
        assert!((p.trace() - 4.94).abs() < 1e-12);
        assert_eq!(p.lambda_min(), 0.02);
        assert_eq!(p.lambda_max(), 1.0);
        assert_eq!(p.excess_risk(p.theta_star().as_slice()), 0.0);
    }

    #[test]
    fn quadratic_toy_excess_along_first_eigendirection() {
        let p = SyntheticProblem::quadratic_toy();
        let mut e1 = vec![0.0; 100];
        e1[0] = 1.0;
        assert!((p.excess_risk(&e1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn regression_toy_shape() {
        let p = SyntheticProblem::regression_toy();
        assert_eq!(p.dim(), 100);
        assert!((p.trace() - 50.5).abs() < 1e-12);
        assert!((p.default_gamma0() - 1.0 / 50.5).abs() < 1e-15);
        assert_eq!(p.excess_risk(p.theta_star().as_slice()), 0.0);
    }

    #[test]
    fn regression_toy_excess_along_weakest_direction() {
        let p = SyntheticProblem::regression_toy();
        let mut theta = p.theta_star().clone();
        theta[0] += 1.0; // eigenvalue 0.01 direction
        assert!((p.excess_risk(theta.as_slice()) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn batch_mean_of_single_sample() {
        let x = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(batch_mean(&[x.clone()]).unwrap(), x);
    }

    #[test]
    fn noiseless_regression_recovers_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 8;
        let theta_star = DVector::from_fn(d, |i, _| (i as f64 + 1.0) / d as f64);
        let xs: Vec<DVector<f64>> = (0..3 * d)
            .map(|_| DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| theta_star.dot(x)).collect();
        let fit = batch_least_squares(&xs, &ys).unwrap();
        assert!((fit - theta_star).norm() < 1e-8);
    }

    #[test]
    fn residual_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = 6;
        let xs: Vec<DVector<f64>> = (0..40)
            .map(|_| DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x[0] - 0.5 * x[1] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fit = batch_least_squares(&xs, &ys).unwrap();
        let mut residual_moment = DVector::<f64>::zeros(d);
        let mut scale = 0.0f64;
        for (x, &y) in xs.iter().zip(&ys) {
            let r = y - fit.dot(x);
            residual_moment.axpy(r, x, 1.0);
            scale += y.abs();
        }
        assert!(
            residual_moment.norm() <= 1e-8 * scale.max(1.0),
            "normal equations violated: {}",
            residual_moment.norm()
        );
    }

    #[test]
    fn least_squares_is_a_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 5;
        let xs: Vec<DVector<f64>> = (0..30)
            .map(|_| DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 2.0 * x[0] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fit = batch_least_squares(&xs, &ys).unwrap();
        let cost = |theta: &DVector<f64>| -> f64 {
            xs.iter()
                .zip(&ys)
                .map(|(x, &y)| {
                    let r = y - theta.dot(x);
                    r * r
                })
                .sum()
        };
        let base = cost(&fit);
        for _ in 0..50 {
            let mut delta = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            delta *= 1e-3 / delta.norm();
            assert!(cost(&(&fit + delta)) >= base - 1e-12);
        }
    }

    #[test]
    fn underdetermined_gram_gets_ridged() {
        // Fewer samples than dimensions: singular Gram, still solvable.
        let xs = vec![DVector::from_vec(vec![1.0, 0.0, 0.0])];
        let ys = vec![2.0];
        let fit = batch_least_squares(&xs, &ys).unwrap();
        assert!(fit.iter().all(|v| v.is_finite()));
        assert!((fit[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn regression_samples_have_declared_covariance() {
        let p = SyntheticProblem::regression_toy();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mut second_moment = vec![0.0f64; p.dim()];
        for _ in 0..n {
            let x = p.sample_x(&mut rng);
            for (m, v) in second_moment.iter_mut().zip(x.iter()) {
                *m += v * v;
            }
        }
        for (i, (&m, &l)) in second_moment.iter().zip(p.eigenvalues()).enumerate() {
            let est = m / n as f64;
            assert!(
                (est - l).abs() < 0.1 * l.max(0.05),
                "coordinate {i}: estimated variance {est}, eigenvalue {l}"
            );
        }
    }
}
