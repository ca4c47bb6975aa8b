//! The learning-rate family γ_t = γ0 (1 + a·γ0·t)^(−c) and the finite-sample
//! error bound for the averaged iterate that is built on it.

use crate::error::{Error, Result};
use crate::loss::LossKind;
use serde::{Deserialize, Serialize};

/// Slack for the `gamma0 * lambda_max <= 1` hypothesis so that the exact
/// boundary choice `gamma0 = 1/lambda_max` passes in floating point.
const ADMISSIBLE_EPS: f64 = 1e-12;

/// Learning-rate schedule γ_t = γ0 (1 + a·γ0·t)^(−c).
///
/// `t` is the 1-based step index: the step consuming sample t uses `rate(t)`,
/// and `rate(0) = γ0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct Schedule {
    gamma0: f64,
    decay: f64,
    exponent: f64,
}

/// Wire format: the (gamma0, a, c) triple used in run-config files.
#[derive(Clone, Copy, Serialize, Deserialize)]
struct ScheduleRepr {
    gamma0: f64,
    a: f64,
    c: f64,
}

impl TryFrom<ScheduleRepr> for Schedule {
    type Error = String;

    fn try_from(r: ScheduleRepr) -> std::result::Result<Self, String> {
        Schedule::new(r.gamma0, r.a, r.c).map_err(|e| e.to_string())
    }
}

impl From<Schedule> for ScheduleRepr {
    fn from(s: Schedule) -> Self {
        ScheduleRepr {
            gamma0: s.gamma0,
            a: s.decay,
            c: s.exponent,
        }
    }
}

impl Schedule {
    /// Requires γ0 > 0, a ≥ 0 and c in [0, 1], which makes the rate
    /// nonincreasing in t.
    pub fn new(gamma0: f64, decay: f64, exponent: f64) -> Result<Self> {
        if !gamma0.is_finite() || gamma0 <= 0.0 {
            return Err(Error::Contract(format!(
                "schedule gamma0 must be positive, got {gamma0}"
            )));
        }
        if !decay.is_finite() || decay < 0.0 {
            return Err(Error::Contract(format!(
                "schedule decay coefficient a must be nonnegative, got {decay}"
            )));
        }
        if !exponent.is_finite() || !(0.0..=1.0).contains(&exponent) {
            return Err(Error::Contract(format!(
                "schedule exponent c must lie in [0, 1], got {exponent}"
            )));
        }
        Ok(Self {
            gamma0,
            decay,
            exponent,
        })
    }

    /// Constant rate γ_t = γ0.
    pub fn constant(gamma0: f64) -> Result<Self> {
        Self::new(gamma0, 0.0, 0.0)
    }

    /// Recommended settings: γ0 = 1/M where M is the largest squared feature
    /// norm, a = λ_min of the curvature at the optimum, and exponent 2/3 for
    /// squared loss or 3/4 for every other loss.
    pub fn recommended(loss: LossKind, max_sq_norm: f64, lambda_min: f64) -> Result<Self> {
        if !max_sq_norm.is_finite() || max_sq_norm <= 0.0 {
            return Err(Error::Contract(format!(
                "max squared norm M must be positive, got {max_sq_norm}"
            )));
        }
        if !lambda_min.is_finite() || lambda_min <= 0.0 {
            return Err(Error::Contract(format!(
                "lambda_min must be positive, got {lambda_min}"
            )));
        }
        let exponent = match loss {
            LossKind::Squared => 2.0 / 3.0,
            _ => 0.75,
        };
        Self::new(1.0 / max_sq_norm, lambda_min, exponent)
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// The decay coefficient a.
    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// The decay exponent c.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// γ_t for a completed-sample count t.
    pub fn rate(&self, t: u64) -> f64 {
        self.gamma0 * (1.0 + self.decay * self.gamma0 * t as f64).powf(-self.exponent)
    }
}

/// Inputs of the finite-sample bound on the averaged iterate: the extreme
/// eigenvalues of the curvature matrix A, tr(A⁻¹S) for the noise covariance
/// S, the initial error ‖θ0 − θ*‖² measured in the A⁻¹ norm, and the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundParams {
    lambda_min: f64,
    lambda_max: f64,
    noise_trace: f64,
    init_error_sq: f64,
    schedule: Schedule,
}

impl BoundParams {
    /// Validates the bound hypotheses: γ0·λ_max ≤ 1 and (2c − 1)·a < λ_min.
    pub fn new(
        lambda_min: f64,
        lambda_max: f64,
        noise_trace: f64,
        init_error_sq: f64,
        schedule: Schedule,
    ) -> Result<Self> {
        let params = Self::unchecked(lambda_min, lambda_max, noise_trace, init_error_sq, schedule);
        params.check_admissible()?;
        Ok(params)
    }

    /// Skips the hypothesis checks. Bound evaluations on an inadmissible
    /// instance still fail; this only exists so callers can experiment with
    /// `kappa` and friends outside the admissible region.
    pub fn unchecked(
        lambda_min: f64,
        lambda_max: f64,
        noise_trace: f64,
        init_error_sq: f64,
        schedule: Schedule,
    ) -> Self {
        Self {
            lambda_min,
            lambda_max,
            noise_trace,
            init_error_sq,
            schedule,
        }
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn noise_trace(&self) -> f64 {
        self.noise_trace
    }

    pub fn init_error_sq(&self) -> f64 {
        self.init_error_sq
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn check_admissible(&self) -> Result<()> {
        if !(self.lambda_min > 0.0) {
            return Err(Error::Contract(format!(
                "lambda_min must be positive, got {}",
                self.lambda_min
            )));
        }
        if self.lambda_max < self.lambda_min {
            return Err(Error::Contract(format!(
                "lambda_max = {} must be >= lambda_min = {}",
                self.lambda_max, self.lambda_min
            )));
        }
        if self.noise_trace < 0.0 || self.init_error_sq < 0.0 {
            return Err(Error::Contract(
                "noise trace and initial error must be nonnegative".into(),
            ));
        }
        let product = self.schedule.gamma0() * self.lambda_max;
        if product > 1.0 + ADMISSIBLE_EPS {
            return Err(Error::Contract(format!(
                "hypothesis gamma0*lambda_max <= 1 violated: {product}"
            )));
        }
        let slope = (2.0 * self.schedule.exponent() - 1.0) * self.schedule.decay();
        if slope >= self.lambda_min {
            return Err(Error::Contract(format!(
                "hypothesis (2c-1)*a < lambda_min violated: {slope} >= {}",
                self.lambda_min
            )));
        }
        Ok(())
    }

    /// κ = 1 − max(0, 2c − 1)·a/λ_min, in (0, 1] for admissible parameters.
    pub fn kappa(&self) -> f64 {
        1.0 - (2.0 * self.schedule.exponent() - 1.0).max(0.0) * self.schedule.decay()
            / self.lambda_min
    }

    /// The constant a·c(1 + a·c·γ0) / (λ_min − max(0, 2c−1)·a) that scales
    /// the transient terms of the bound. Zero exactly when a·c = 0.
    pub fn correction_coef(&self) -> Result<f64> {
        self.check_admissible()?;
        let a = self.schedule.decay();
        let c = self.schedule.exponent();
        let ac = a * c;
        let denom = self.lambda_min - (2.0 * c - 1.0).max(0.0) * a;
        Ok(ac * (1.0 + ac * self.schedule.gamma0()) / denom)
    }

    /// Upper bound on t·E‖θ̄_t − θ*‖²_A after t averaged steps:
    ///
    /// tr(A⁻¹S) + (2c0 + c0²)(1 + a·γ0·t)^(c−1)/c · tr(A⁻¹S)
    ///          + (1 + c0)²/(γ0²·t) · ‖θ0 − θ*‖²_{A⁻¹}
    ///
    /// The middle term divides by c, so c = 0 is rejected; the bound's
    /// interesting regime has c > 0.
    pub fn averaged_error_bound(&self, t: u64) -> Result<f64> {
        self.check_admissible()?;
        if t == 0 {
            return Err(Error::Contract("bound requires t >= 1".into()));
        }
        let c = self.schedule.exponent();
        if c == 0.0 {
            return Err(Error::Contract(
                "averaged error bound is undefined for exponent c = 0".into(),
            ));
        }
        let c0 = self.correction_coef()?;
        let gamma0 = self.schedule.gamma0();
        let a = self.schedule.decay();
        let transient = (2.0 * c0 + c0 * c0) * (1.0 + a * gamma0 * t as f64).powf(c - 1.0) / c
            * self.noise_trace;
        let initial = (1.0 + c0) * (1.0 + c0) / (gamma0 * gamma0 * t as f64) * self.init_error_sq;
        Ok(self.noise_trace + transient + initial)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rate_at_zero_is_gamma0() {
        let s = Schedule::new(0.3, 5.0, 0.9).unwrap();
        assert_eq!(s.rate(0), 0.3);
    }

    #[test]
    fn zero_decay_gives_constant_rate() {
        let s = Schedule::constant(0.25).unwrap();
        assert_eq!(s.rate(0), 0.25);
        assert_eq!(s.rate(10_000_000), 0.25);
    }

    #[test]
    fn rate_closed_form_example() {
        // gamma_t = (1 + 0.02 t)^(-2/3) at t = 50
        let s = Schedule::new(1.0, 0.02, 2.0 / 3.0).unwrap();
        assert!((s.rate(50) - 0.6299605249474366).abs() < 1e-15);
    }

    #[test]
    fn inverse_time_form() {
        // With a = lambda_min and c = 1 the family reproduces
        // gamma0 (1 + gamma0 lambda_min t)^(-1).
        let gamma0 = 0.5;
        let lambda_min = 0.02;
        let s = Schedule::new(gamma0, lambda_min, 1.0).unwrap();
        for t in [0u64, 1, 10, 1000, 123_456] {
            let direct = gamma0 / (1.0 + gamma0 * lambda_min * t as f64);
            assert!((s.rate(t) - direct).abs() <= 1e-15 * direct.abs());
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Schedule::new(0.0, 0.0, 0.5).is_err());
        assert!(Schedule::new(-1.0, 0.0, 0.5).is_err());
        assert!(Schedule::new(1.0, -0.1, 0.5).is_err());
        assert!(Schedule::new(1.0, 0.1, 1.5).is_err());
        assert!(Schedule::new(1.0, 0.1, -0.5).is_err());
        assert!(Schedule::new(f64::NAN, 0.1, 0.5).is_err());
    }

    #[test]
    fn recommended_for_squared_loss() {
        let s = Schedule::recommended(LossKind::Squared, 1.0, 0.01).unwrap();
        assert_eq!(s.gamma0(), 1.0);
        assert_eq!(s.decay(), 0.01);
        assert!((s.exponent() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn recommended_for_logistic_loss() {
        let s = Schedule::recommended(LossKind::Logistic, 4.0, 1e-5).unwrap();
        assert_eq!(s.gamma0(), 0.25);
        assert_eq!(s.decay(), 1e-5);
        assert_eq!(s.exponent(), 0.75);
    }

    #[test]
    fn recommended_for_squared_hinge() {
        let s = Schedule::recommended(LossKind::SquaredHinge, 6.8, 1e-6).unwrap();
        assert!((s.gamma0() - 0.14705882352941177).abs() < 1e-15);
        assert_eq!(s.decay(), 1e-6);
        assert_eq!(s.exponent(), 0.75);
    }

    #[test]
    fn recommended_rejects_nonpositive_inputs() {
        assert!(Schedule::recommended(LossKind::Squared, 0.0, 0.1).is_err());
        assert!(Schedule::recommended(LossKind::Squared, 1.0, 0.0).is_err());
    }

    fn params(
        lambda_min: f64,
        lambda_max: f64,
        noise_trace: f64,
        init_error_sq: f64,
        schedule: Schedule,
    ) -> BoundParams {
        BoundParams::new(lambda_min, lambda_max, noise_trace, init_error_sq, schedule).unwrap()
    }

    #[test]
    fn correction_coef_vanishes_without_decay() {
        let s = Schedule::new(1.0, 0.0, 0.5).unwrap();
        assert_eq!(params(1.0, 1.0, 1.0, 1.0, s).correction_coef().unwrap(), 0.0);
        let s = Schedule::new(1.0, 0.5, 0.0).unwrap();
        assert_eq!(params(1.0, 1.0, 1.0, 1.0, s).correction_coef().unwrap(), 0.0);
    }

    #[test]
    fn correction_coef_closed_form_example() {
        // a = lambda_min = 0.02, c = 2/3, gamma0 = 1: the denominator cancels
        // with a*c and the value is exactly 1 + a*c*gamma0.
        let s = Schedule::new(1.0, 0.02, 2.0 / 3.0).unwrap();
        let c0 = params(0.02, 1.0, 0.0, 0.0, s).correction_coef().unwrap();
        assert!(
            (c0 - 1.0133333333333333).abs() < 1e-12,
            "c0 = {c0}, expected 1.0133333333333333"
        );
    }

    #[test]
    fn admissibility_names_the_violated_hypothesis() {
        let s = Schedule::new(2.0, 0.0, 0.5).unwrap();
        let err = BoundParams::new(0.5, 1.0, 1.0, 1.0, s).unwrap_err();
        assert!(err.to_string().contains("gamma0*lambda_max"), "{err}");

        let s = Schedule::new(0.5, 1.0, 1.0).unwrap();
        let err = BoundParams::new(0.5, 1.0, 1.0, 1.0, s).unwrap_err();
        assert!(err.to_string().contains("(2c-1)*a"), "{err}");
    }

    #[test]
    fn boundary_gamma0_is_admissible() {
        let lambda_max = 3.7;
        let s = Schedule::new(1.0 / lambda_max, 0.01, 0.75).unwrap();
        assert!(BoundParams::new(0.1, lambda_max, 1.0, 1.0, s).is_ok());
    }

    #[test]
    fn bound_reduces_to_noise_trace_when_both_transients_vanish() {
        // a = 0 kills the middle term through c0 = 0; zero initial error
        // kills the last.
        let s = Schedule::new(1.0, 0.0, 0.5).unwrap();
        let p = params(1.0, 1.0, 2.5, 0.0, s);
        assert_eq!(p.averaged_error_bound(7).unwrap(), 2.5);
    }

    #[test]
    fn bound_hand_example() {
        let s = Schedule::new(1.0, 1.0, 0.5).unwrap();
        let p = params(1.0, 1.0, 1.0, 1.0, s);
        assert!((p.correction_coef().unwrap() - 0.75).abs() < 1e-15);
        let bound = p.averaged_error_bound(100).unwrap();
        assert!(
            (bound - 1.4410778409616205).abs() < 1e-12,
            "bound = {bound}"
        );
    }

    #[test]
    fn bound_converges_to_noise_trace() {
        // Exponent 1/2 so the transient term has decayed past 1e-3 relative
        // by t = 1e9.
        let s = Schedule::new(0.5, 0.05, 0.5).unwrap();
        let p = params(0.05, 2.0, 3.0, 10.0, s);
        // Decreasing toward tr(A^-1 S) once the initial-error term has faded.
        let mut last = f64::INFINITY;
        for t in [100u64, 1_000, 10_000, 100_000, 1_000_000] {
            let b = p.averaged_error_bound(t).unwrap();
            assert!(b < last, "bound not decreasing at t = {t}");
            assert!(b >= p.noise_trace());
            last = b;
        }
        let limit = p.averaged_error_bound(1_000_000_000).unwrap();
        assert!((limit - p.noise_trace()).abs() / p.noise_trace() < 1e-3);
    }

    #[test]
    fn bound_rejects_zero_exponent() {
        let s = Schedule::new(0.5, 0.0, 0.0).unwrap();
        let p = params(1.0, 1.0, 1.0, 1.0, s);
        assert!(matches!(
            p.averaged_error_bound(10).unwrap_err(),
            Error::Contract(_)
        ));
    }

    #[test]
    fn unchecked_construction_defers_validation() {
        let s = Schedule::new(2.0, 0.0, 0.5).unwrap();
        let p = BoundParams::unchecked(0.5, 1.0, 1.0, 1.0, s);
        assert!(p.correction_coef().is_err());
        assert!(p.averaged_error_bound(10).is_err());
    }

    proptest! {
        #[test]
        fn rate_is_nonincreasing(
            gamma0 in 1e-3f64..2.0,
            decay in 0.0f64..5.0,
            exponent in 0.0f64..=1.0,
            t in 0u64..1_000_000,
        ) {
            let s = Schedule::new(gamma0, decay, exponent).unwrap();
            prop_assert!(s.rate(t + 1) <= s.rate(t));
            prop_assert!(s.rate(t) <= gamma0);
        }

        #[test]
        fn correction_coef_nonnegative_and_zero_iff_ac_zero(
            lambda_min in 0.01f64..1.0,
            decay_frac in 0.0f64..0.9,
            exponent in 0.0f64..=1.0,
        ) {
            // Keep (2c-1) a < lambda_min by scaling a below lambda_min.
            let decay = decay_frac * lambda_min;
            let schedule = Schedule::new(0.1, decay, exponent).unwrap();
            let p = BoundParams::new(lambda_min, 2.0, 1.0, 1.0, schedule).unwrap();
            let c0 = p.correction_coef().unwrap();
            prop_assert!(c0 >= 0.0);
            prop_assert_eq!(c0 == 0.0, decay * exponent == 0.0);
            let kappa = p.kappa();
            prop_assert!(kappa > 0.0 && kappa <= 1.0);
        }
    }
}
