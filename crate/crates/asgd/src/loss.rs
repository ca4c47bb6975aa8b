//! Loss functions L(s, y) and their scalar derivatives with respect to the
//! score s. L2 regularization is applied multiplicatively inside the trainers,
//! not here.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Supported losses. All but `Squared` require labels in {-1, +1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// ½(y − s)², for regression.
    Squared,
    /// max(0, 1 − ys).
    Hinge,
    /// ½ max(0, 1 − ys)².
    #[serde(rename = "l2svm")]
    SquaredHinge,
    /// log(1 + exp(−ys)).
    Logistic,
}

impl LossKind {
    pub fn is_classification(self) -> bool {
        !matches!(self, LossKind::Squared)
    }

    fn check_label(self, y: f64) -> Result<()> {
        if self.is_classification() && y != 1.0 && y != -1.0 {
            return Err(Error::Contract(format!(
                "{self} loss requires labels in {{-1, +1}}, got {y}"
            )));
        }
        Ok(())
    }

    /// L(s, y).
    pub fn value(self, s: f64, y: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(match self {
            LossKind::Squared => 0.5 * (y - s) * (y - s),
            LossKind::Hinge => (1.0 - y * s).max(0.0),
            LossKind::SquaredHinge => {
                let margin = (1.0 - y * s).max(0.0);
                0.5 * margin * margin
            }
            LossKind::Logistic => {
                // log(1 + e^z) = max(0, z) + log1p(e^-|z|), overflow-safe for
                // the large scores seen early in training.
                let z = -y * s;
                z.max(0.0) + (-z.abs()).exp().ln_1p()
            }
        })
    }

    /// dL/ds. At the hinge kink ys = 1 the subgradient 0 is returned, so a
    /// point exactly on the margin produces no update.
    pub fn deriv(self, s: f64, y: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(match self {
            LossKind::Squared => s - y,
            LossKind::Hinge => {
                if y * s < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            LossKind::SquaredHinge => -y * (1.0 - y * s).max(0.0),
            LossKind::Logistic => -y / (1.0 + (y * s).exp()),
        })
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Squared => "squared",
            LossKind::Hinge => "hinge",
            LossKind::SquaredHinge => "l2svm",
            LossKind::Logistic => "logistic",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "hinge" => Ok(LossKind::Hinge),
            "l2svm" => Ok(LossKind::SquaredHinge),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(Error::Data(format!("unknown loss {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn squared_hinge_satisfied_margin() {
        assert_eq!(LossKind::SquaredHinge.value(2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn squared_hinge_inside_margin() {
        assert_eq!(LossKind::SquaredHinge.value(0.5, 1.0).unwrap(), 0.125);
    }

    #[test]
    fn logistic_at_zero_score() {
        let v = LossKind::Logistic.value(0.0, 1.0).unwrap();
        assert!((v - 0.6931471805599453).abs() < 1e-15);
    }

    #[test]
    fn squared_deriv() {
        assert_eq!(LossKind::Squared.deriv(3.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn squared_hinge_deriv() {
        assert_eq!(LossKind::SquaredHinge.deriv(0.5, 1.0).unwrap(), -0.5);
    }

    #[test]
    fn hinge_kink_gives_zero() {
        assert_eq!(LossKind::Hinge.deriv(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(LossKind::Hinge.deriv(-1.0, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn logistic_is_overflow_safe() {
        assert!(LossKind::Logistic.value(-1e6, 1.0).unwrap().is_finite());
        assert!(LossKind::Logistic.value(1e6, -1.0).unwrap().is_finite());
        assert_eq!(LossKind::Logistic.deriv(1e6, -1.0).unwrap(), 1.0);
        assert_eq!(LossKind::Logistic.deriv(-1e6, 1.0).unwrap(), -1.0);
    }

    #[test]
    fn classification_labels_validated() {
        for kind in [LossKind::Hinge, LossKind::SquaredHinge, LossKind::Logistic] {
            assert!(matches!(
                kind.value(0.3, 2.0).unwrap_err(),
                Error::Contract(_)
            ));
        }
        // Regression labels are unrestricted.
        assert!(LossKind::Squared.value(0.3, 2.5).is_ok());
    }

    #[test]
    fn config_names_round_trip() {
        for name in ["squared", "hinge", "l2svm", "logistic"] {
            let kind: LossKind = name.parse().unwrap();
            assert_eq!(kind.to_string(), name);
        }
        assert!("l1svm".parse::<LossKind>().is_err());
    }

    proptest! {
        // ½ hinge² = squared hinge, everywhere.
        #[test]
        fn squared_hinge_is_half_square_of_hinge(s in -5.0f64..5.0, neg in proptest::bool::ANY) {
            let y = if neg { -1.0 } else { 1.0 };
            let h = LossKind::Hinge.value(s, y).unwrap();
            let sh = LossKind::SquaredHinge.value(s, y).unwrap();
            prop_assert!((sh - 0.5 * h * h).abs() < 1e-15);
        }

        // Convexity in s (midpoint test), and nonnegativity.
        #[test]
        fn convex_and_nonnegative(s1 in -5.0f64..5.0, s2 in -5.0f64..5.0, neg in proptest::bool::ANY) {
            let y = if neg { -1.0 } else { 1.0 };
            for kind in [LossKind::Hinge, LossKind::SquaredHinge, LossKind::Logistic] {
                let mid = kind.value(0.5 * (s1 + s2), y).unwrap();
                let avg = 0.5 * (kind.value(s1, y).unwrap() + kind.value(s2, y).unwrap());
                prop_assert!(mid <= avg + 1e-12);
                prop_assert!(mid >= 0.0);
            }
            prop_assert!(LossKind::Squared.value(s1, s2).unwrap() >= 0.0);
        }
    }

    // Central finite differences agree with deriv for the smooth losses
    // (and for squared hinge away from its kink).
    #[test]
    fn deriv_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let step = 1e-5;
        for kind in [LossKind::Squared, LossKind::SquaredHinge, LossKind::Logistic] {
            let mut checked = 0;
            while checked < 1000 {
                let s: f64 = rng.random_range(-4.0..4.0);
                let y = if kind == LossKind::Squared {
                    rng.random_range(-2.0..2.0)
                } else if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                };
                if kind == LossKind::SquaredHinge && (1.0 - y * s).abs() < 1e-4 {
                    continue; // kink neighborhood
                }
                let numeric = (kind.value(s + step, y).unwrap() - kind.value(s - step, y).unwrap())
                    / (2.0 * step);
                let analytic = kind.deriv(s, y).unwrap();
                assert!(
                    (numeric - analytic).abs() <= 1e-6,
                    "{kind}: finite difference {numeric} vs deriv {analytic} at s={s}, y={y}"
                );
                checked += 1;
            }
        }
    }
}
