//! Multi-arm synthetic experiments comparing schedules and estimators.
//!
//! Each seed replays the identical sample stream through every arm, seeds are
//! derived as `base ^ replicate`, and replicates run in parallel with a fixed
//! aggregation order so results are reproducible.

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::schedule::Schedule;
use crate::sparse::{Sample, SparseVector};
use crate::theory::synthetic::{LeastSquares, SyntheticProblem};
use crate::trainer::{AsgdState, AveragingStart, SgdState};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Mean excess risk of one arm at each checkpoint.
#[derive(Clone, Debug, Serialize)]
pub struct ArmTrajectory {
    pub arm: &'static str,
    pub schedule: Option<Schedule>,
    pub points: Vec<(u64, f64)>,
}

fn check_checkpoints(checkpoints: &[u64], steps: u64) -> Result<()> {
    if checkpoints.is_empty()
        || checkpoints[0] == 0
        || checkpoints.windows(2).any(|w| w[0] >= w[1])
        || *checkpoints.last().unwrap() > steps
    {
        return Err(Error::Contract(
            "checkpoints must be strictly increasing, >= 1 and <= steps".into(),
        ));
    }
    Ok(())
}

fn average_arms(
    per_seed: Vec<Vec<Vec<f64>>>,
    arms: &[(&'static str, Option<Schedule>)],
    checkpoints: &[u64],
) -> Vec<ArmTrajectory> {
    let seeds = per_seed.len() as f64;
    arms.iter()
        .enumerate()
        .map(|(arm_idx, &(arm, schedule))| {
            let points = checkpoints
                .iter()
                .enumerate()
                .map(|(k, &step)| {
                    let mean =
                        per_seed.iter().map(|s| s[arm_idx][k]).sum::<f64>() / seeds;
                    (step, mean)
                })
                .collect();
            ArmTrajectory {
                arm,
                schedule,
                points,
            }
        })
        .collect()
}

/// Schedule comparison on the quadratic toy. Four arms on the shared stream
/// x_t ~ N(0, I): averaged iterates under the curvature-matched schedule
/// (1 + 0.02t)^(-2/3) and under the generic (1 + t)^(-1/2), the plain SGD
/// iterate under (1 + 0.02t)^(-1), and the running batch mean of the x_t.
///
/// The gradient arms start at all-ones. Starting at the optimum would make
/// every schedule look asymptotic immediately; the whole point is how fast
/// each one works off the initial error.
pub fn run_quadratic_toy(
    steps: u64,
    seeds: u64,
    checkpoints: &[u64],
    base_seed: u64,
) -> Result<Vec<ArmTrajectory>> {
    check_checkpoints(checkpoints, steps)?;
    let problem = SyntheticProblem::quadratic_toy();
    let asgd = Schedule::new(1.0, 0.02, 2.0 / 3.0)?;
    let asgd_bad = Schedule::new(1.0, 1.0, 0.5)?;
    let sgd = Schedule::new(1.0, 0.02, 1.0)?;
    let arms = [
        ("asgd", Some(asgd)),
        ("asgd_bad", Some(asgd_bad)),
        ("sgd", Some(sgd)),
        ("batch", None),
    ];

    let per_seed: Vec<Vec<Vec<f64>>> = (0..seeds)
        .into_par_iter()
        .map(|replicate| -> Result<Vec<Vec<f64>>> {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed ^ replicate);
            let d = problem.dim();
            let eigenvalues = problem.eigenvalues().to_vec();
            let start = DVector::<f64>::from_element(d, 1.0);
            let mut iterates = [start.clone(), start.clone(), start];
            let mut averages = [DVector::<f64>::zeros(d), DVector::zeros(d)];
            let mut mean_x = DVector::<f64>::zeros(d);
            let mut rows: Vec<Vec<f64>> = vec![Vec::new(); arms.len()];
            let mut next = 0usize;
            for t in 1..=steps {
                let x = problem.sample_x(&mut rng);
                for (arm_idx, schedule) in [asgd, asgd_bad, sgd].iter().enumerate() {
                    let gamma = schedule.rate(t);
                    let theta = &mut iterates[arm_idx];
                    // theta -= gamma * A (theta - x), diagonal A.
                    for i in 0..d {
                        theta[i] -= gamma * eigenvalues[i] * (theta[i] - x[i]);
                    }
                }
                let weight = 1.0 / t as f64;
                for (avg, iterate) in averages.iter_mut().zip(&iterates) {
                    avg.axpy(weight, iterate, 1.0 - weight);
                }
                mean_x.axpy(weight, &x, 1.0 - weight);
                if next < checkpoints.len() && checkpoints[next] == t {
                    let reported = [
                        averages[0].as_slice(),
                        averages[1].as_slice(),
                        iterates[2].as_slice(),
                        mean_x.as_slice(),
                    ];
                    for (row, weights) in rows.iter_mut().zip(reported) {
                        let excess = problem.excess_risk(weights);
                        if !excess.is_finite() {
                            return Err(Error::Diverged { step: t });
                        }
                        row.push(excess);
                    }
                    next += 1;
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    Ok(average_arms(per_seed, &arms, checkpoints))
}

/// Estimator comparison on the regression toy: the averaged trainer and the
/// plain SGD trainer (both with γ0 = 1/tr(A)) against exact batch least
/// squares, all on the shared stream (x_t, y_t).
pub fn run_regression_toy(
    steps: u64,
    seeds: u64,
    checkpoints: &[u64],
    base_seed: u64,
) -> Result<Vec<ArmTrajectory>> {
    check_checkpoints(checkpoints, steps)?;
    let problem = SyntheticProblem::regression_toy();
    let gamma0 = problem.default_gamma0();
    let lambda_min = problem.lambda_min();
    let asgd_schedule = Schedule::new(gamma0, lambda_min, 2.0 / 3.0)?;
    let sgd_schedule = Schedule::new(gamma0, lambda_min, 1.0)?;
    let arms = [
        ("asgd", Some(asgd_schedule)),
        ("sgd", Some(sgd_schedule)),
        ("batch", None),
    ];

    let per_seed: Vec<Vec<Vec<f64>>> = (0..seeds)
        .into_par_iter()
        .map(|replicate| -> Result<Vec<Vec<f64>>> {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed ^ replicate);
            let d = problem.dim();
            let mut asgd = AsgdState::new(
                d,
                asgd_schedule,
                0.0,
                LossKind::Squared,
                AveragingStart::Fixed(0),
            )?;
            let mut sgd = SgdState::new(d, sgd_schedule, 0.0, LossKind::Squared)?;
            let mut batch = LeastSquares::new(d);
            let mut rows: Vec<Vec<f64>> = vec![Vec::new(); arms.len()];
            let mut next = 0usize;
            for t in 1..=steps {
                let (x, y) = problem.sample_labeled(&mut rng);
                let sample = Sample::new(SparseVector::from_dense(x.as_slice()), y);
                asgd.step(&sample)?;
                sgd.step(&sample)?;
                batch.add(&x, y);
                if next < checkpoints.len() && checkpoints[next] == t {
                    let (_, theta_bar) = asgd.recover();
                    rows[0].push(problem.excess_risk(theta_bar.weights()));
                    rows[1].push(problem.excess_risk(sgd.theta().weights()));
                    rows[2].push(problem.excess_risk(batch.solve()?.as_slice()));
                    next += 1;
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    Ok(average_arms(per_seed, &arms, checkpoints))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_toy_batch_arm_shrinks() {
        // Law of large numbers: the batch mean's excess risk trends toward 0.
        let arms = run_quadratic_toy(4_000, 3, &[10, 100, 1_000, 4_000], 42).unwrap();
        let batch = arms.iter().find(|a| a.arm == "batch").unwrap();
        assert!(batch.points[3].1 < batch.points[0].1);
        assert!(batch.points[3].1 < 0.2);
    }

    #[test]
    fn quadratic_toy_arm_set_and_determinism() {
        let a = run_quadratic_toy(500, 2, &[500], 7).unwrap();
        let b = run_quadratic_toy(500, 2, &[500], 7).unwrap();
        let names: Vec<_> = a.iter().map(|t| t.arm).collect();
        assert_eq!(names, vec!["asgd", "asgd_bad", "sgd", "batch"]);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.points, y.points);
        }
        // The schedules logged for the three gradient arms are the exact triples.
        let asgd = a[0].schedule.unwrap();
        assert_eq!(
            (asgd.gamma0(), asgd.decay(), asgd.exponent()),
            (1.0, 0.02, 2.0 / 3.0)
        );
        let bad = a[1].schedule.unwrap();
        assert_eq!((bad.gamma0(), bad.decay(), bad.exponent()), (1.0, 1.0, 0.5));
        let sgd = a[2].schedule.unwrap();
        assert_eq!((sgd.gamma0(), sgd.decay(), sgd.exponent()), (1.0, 0.02, 1.0));
    }

    #[test]
    fn regression_toy_runs_and_batch_tracks_truth() {
        let arms = run_regression_toy(2_000, 2, &[200, 2_000], 11).unwrap();
        let batch = arms.iter().find(|a| a.arm == "batch").unwrap();
        // sigma^2 d / (2t) is the textbook batch excess; allow generous slack.
        assert!(batch.points[1].1 < 0.1, "batch excess {}", batch.points[1].1);
        let asgd = arms.iter().find(|a| a.arm == "asgd").unwrap();
        assert!(asgd.points[1].1 < asgd.points[0].1);
    }

    #[test]
    fn bad_checkpoints_rejected() {
        assert!(run_quadratic_toy(100, 1, &[], 1).is_err());
        assert!(run_quadratic_toy(100, 1, &[0, 10], 1).is_err());
        assert!(run_quadratic_toy(100, 1, &[10, 10], 1).is_err());
        assert!(run_quadratic_toy(100, 1, &[10, 200], 1).is_err());
    }
}
