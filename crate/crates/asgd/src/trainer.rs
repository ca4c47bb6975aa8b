//! One-pass SGD and sparse averaged-SGD trainers.
//!
//! Both trainers keep the L2 shrink out of the per-coordinate work: the
//! iterate is stored behind a scalar divisor so a regularized step touches
//! only the coordinates of the incoming sample. The averaged trainer
//! additionally carries the running average in the same scaled form, so one
//! step costs O(nnz) regardless of dimension once averaging has begun.

use crate::error::{Error, Result};
use crate::instrument;
use crate::loss::LossKind;
use crate::model::{LinearModel, MetricsRecord, WhichModel};
use crate::schedule::Schedule;
use crate::sparse::{Sample, SparseVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Divisor magnitude that triggers a re-anchor, far from f64 overflow.
const ANCHOR_LIMIT: f64 = 1e100;

/// Plain SGD: θ_t = (1 − λγ_t)·θ_{t−1} − γ_t·L_s(θᵀx, y)·x.
#[derive(Clone, Debug)]
pub struct SgdState {
    weights: Vec<f64>,
    scale: f64,
    step: u64,
    schedule: Schedule,
    lambda: f64,
    loss: LossKind,
}

impl SgdState {
    pub fn new(dim: usize, schedule: Schedule, lambda: f64, loss: LossKind) -> Result<Self> {
        Self::from_model(LinearModel::zeros(dim), schedule, lambda, loss)
    }

    pub fn from_model(
        model: LinearModel,
        schedule: Schedule,
        lambda: f64,
        loss: LossKind,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            weights: model.weights().to_vec(),
            scale: 1.0,
            step: 0,
            schedule,
            lambda,
            loss,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Materializes the current iterate.
    pub fn theta(&self) -> LinearModel {
        instrument::add_touches(self.weights.len());
        LinearModel::from_raw(self.weights.iter().map(|w| w * self.scale).collect())
    }

    /// Consumes one sample. Only the coordinates of `sample` and the scalar
    /// shrink multiplier change.
    pub fn step(&mut self, sample: &Sample) -> Result<()> {
        let t = self.step + 1;
        let gamma = self.schedule.rate(t);
        let shrink = 1.0 - self.lambda * gamma;
        if shrink <= 0.0 {
            return Err(Error::ShrinkNonpositive {
                step: t,
                product: self.lambda * gamma,
            });
        }
        let score = self.scale * sample.features.dot(&self.weights)?;
        if !score.is_finite() {
            return Err(Error::Diverged { step: t });
        }
        let slope = self.loss.deriv(score, sample.label)?;
        if !slope.is_finite() {
            return Err(Error::Diverged { step: t });
        }
        self.scale *= shrink;
        let update = -gamma * slope / self.scale;
        if !update.is_finite() {
            return Err(Error::Diverged { step: t });
        }
        sample.features.axpy(update, &mut self.weights)?;
        if self.scale < 1e-100 {
            self.renormalize();
        }
        self.step = t;
        Ok(())
    }

    fn renormalize(&mut self) {
        instrument::add_touches(self.weights.len());
        for w in &mut self.weights {
            *w *= self.scale;
        }
        self.scale = 1.0;
    }
}

/// When iterate averaging begins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AveragingStart {
    /// Average every iterate after the given step (0 = from the first step).
    Fixed(u64),
    /// Watch the streaming loss of the iterate against the loss of its
    /// exponential moving average; start once the smoothed copy wins, but
    /// not before `warmup` steps.
    Auto { warmup: u64 },
}

impl Default for AveragingStart {
    fn default() -> Self {
        AveragingStart::Auto {
            warmup: DEFAULT_WARMUP,
        }
    }
}

pub const DEFAULT_WARMUP: u64 = 50;

/// Decides when averaging should begin.
///
/// Maintains θ̂ ← 0.99·θ̂ + 0.01·θ together with equally-smoothed streaming
/// losses of both (measured on each sample before the update, progressive
/// validation style), and fires once the smoothed copy's loss EMA drops
/// strictly below the iterate's. A fixed start step bypasses all of it.
#[derive(Clone, Debug)]
pub struct StartDetector {
    fixed_start: Option<u64>,
    warmup: u64,
    decay: f64,
    smoothed: Vec<f64>,
    iterate_loss_ema: f64,
    smoothed_loss_ema: f64,
    seen_any: bool,
}

impl StartDetector {
    pub fn auto(theta0: &[f64], warmup: u64) -> Self {
        Self {
            fixed_start: None,
            warmup,
            decay: 0.99,
            smoothed: theta0.to_vec(),
            iterate_loss_ema: 0.0,
            smoothed_loss_ema: 0.0,
            seen_any: false,
        }
    }

    pub fn fixed(start: u64) -> Self {
        Self {
            fixed_start: Some(start),
            warmup: 0,
            decay: 0.99,
            smoothed: Vec::new(),
            iterate_loss_ema: 0.0,
            smoothed_loss_ema: 0.0,
            seen_any: false,
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.fixed_start.is_some()
    }

    fn smoothed_score(&self, x: &SparseVector) -> Result<f64> {
        x.dot(&self.smoothed)
    }

    /// Folds one observation in and reports whether averaging should start
    /// at step `t`. `weights`/`divisor` describe the post-update iterate
    /// θ_t = weights/divisor. Dense: costs O(dim) per call.
    fn observe(
        &mut self,
        weights: &[f64],
        divisor: f64,
        iterate_loss: f64,
        smoothed_loss: f64,
        t: u64,
    ) -> bool {
        if self.seen_any {
            let keep = self.decay;
            self.iterate_loss_ema = keep * self.iterate_loss_ema + (1.0 - keep) * iterate_loss;
            self.smoothed_loss_ema = keep * self.smoothed_loss_ema + (1.0 - keep) * smoothed_loss;
        } else {
            self.iterate_loss_ema = iterate_loss;
            self.smoothed_loss_ema = smoothed_loss;
            self.seen_any = true;
        }
        instrument::add_touches(self.smoothed.len());
        let keep = self.decay;
        for (s, &w) in self.smoothed.iter_mut().zip(weights) {
            *s = keep * *s + (1.0 - keep) * (w / divisor);
        }
        t >= self.warmup && self.smoothed_loss_ema < self.iterate_loss_ema
    }

    fn release(&mut self) {
        self.smoothed = Vec::new();
    }
}

/// Sparse averaged SGD.
///
/// State is the reparameterized pair of vectors plus three scalars:
/// θ_t = weights/weights_divisor and, once averaging has begun,
/// θ̄_t = (avg_fraction·weights + avg_weights)/avg_divisor. The recurrences
/// per sample are
///
///   weights_divisor ← weights_divisor/(1 − λγ_t)
///   avg_divisor     ← avg_divisor/(1 − η_t)
///   weights         ← weights − weights_divisor·γ_t·g_t
///   avg_weights     ← avg_weights + avg_fraction·weights_divisor·γ_t·g_t
///   avg_fraction    ← avg_fraction + η_t·avg_divisor/weights_divisor
///
/// with η_t = 1/(t − t0), so θ̄_t is the plain mean of θ_{t0+1..t}. Until the
/// start detector fires, only the iterate half of the state advances.
#[derive(Clone, Debug)]
pub struct AsgdState {
    weights: Vec<f64>,
    avg_weights: Vec<f64>,
    weights_divisor: f64,
    avg_divisor: f64,
    avg_fraction: f64,
    step: u64,
    avg_start: Option<u64>,
    detector: StartDetector,
    schedule: Schedule,
    lambda: f64,
    loss: LossKind,
}

impl AsgdState {
    pub fn new(
        dim: usize,
        schedule: Schedule,
        lambda: f64,
        loss: LossKind,
        start: AveragingStart,
    ) -> Result<Self> {
        Self::from_model(LinearModel::zeros(dim), schedule, lambda, loss, start)
    }

    pub fn from_model(
        model: LinearModel,
        schedule: Schedule,
        lambda: f64,
        loss: LossKind,
        start: AveragingStart,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        let weights = model.weights().to_vec();
        let (detector, avg_start) = match start {
            AveragingStart::Fixed(0) => (StartDetector::fixed(0), Some(0)),
            AveragingStart::Fixed(t0) => (StartDetector::fixed(t0), None),
            AveragingStart::Auto { warmup } => (StartDetector::auto(&weights, warmup), None),
        };
        let avg_weights = vec![0.0; weights.len()];
        Ok(Self {
            weights,
            avg_weights,
            weights_divisor: 1.0,
            avg_divisor: 1.0,
            avg_fraction: 0.0,
            step: 0,
            avg_start,
            detector,
            schedule,
            lambda,
            loss,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// The step after which iterates enter the average, once known.
    pub fn avg_start(&self) -> Option<u64> {
        self.avg_start
    }

    fn averaged_steps(&self) -> u64 {
        self.avg_start.map_or(0, |t0| self.step - t0)
    }

    /// Consumes one sample: the iterate update of plain SGD plus the scaled
    /// average bookkeeping, all in O(nnz) (plus an O(dim) detector sweep
    /// while averaging has not started).
    pub fn step(&mut self, sample: &Sample) -> Result<()> {
        let t = self.step + 1;
        let gamma = self.schedule.rate(t);
        let shrink = 1.0 - self.lambda * gamma;
        if shrink <= 0.0 {
            return Err(Error::ShrinkNonpositive {
                step: t,
                product: self.lambda * gamma,
            });
        }
        let score = sample.features.dot(&self.weights)? / self.weights_divisor;
        if !score.is_finite() {
            return Err(Error::Diverged { step: t });
        }

        // Detection-phase loss bookkeeping happens against the pre-update
        // iterate and its smoothed copy.
        let observed = if self.avg_start.is_none() && !self.detector.is_fixed() {
            let smoothed_score = self.detector.smoothed_score(&sample.features)?;
            Some((
                self.loss.value(score, sample.label)?,
                self.loss.value(smoothed_score, sample.label)?,
            ))
        } else {
            None
        };

        let slope = self.loss.deriv(score, sample.label)?;
        if !slope.is_finite() {
            return Err(Error::Diverged { step: t });
        }
        self.weights_divisor /= shrink;
        let update = self.weights_divisor * gamma * slope;
        if !update.is_finite() {
            return Err(Error::Diverged { step: t });
        }

        match self.avg_start {
            Some(t0) => {
                let averaged = t - t0;
                if averaged == 1 {
                    // η = 1: the first averaged step makes θ̄ = θ, which in
                    // scaled form is (avg_divisor, avg_fraction, avg_weights)
                    // = (1, 1/weights_divisor, 0). Feeding η = 1 through the
                    // avg_divisor recurrence instead would divide by zero.
                    sample.features.axpy(-update, &mut self.weights)?;
                    self.avg_divisor = 1.0;
                    self.avg_fraction = 1.0 / self.weights_divisor;
                    instrument::add_touches(self.avg_weights.len());
                    self.avg_weights.fill(0.0);
                } else {
                    let eta = 1.0 / averaged as f64;
                    self.avg_divisor /= 1.0 - eta;
                    sample.features.axpy(-update, &mut self.weights)?;
                    sample
                        .features
                        .axpy(self.avg_fraction * update, &mut self.avg_weights)?;
                    self.avg_fraction += eta * self.avg_divisor / self.weights_divisor;
                }
                self.step = t;
            }
            None => {
                sample.features.axpy(-update, &mut self.weights)?;
                self.step = t;
                let triggered = match observed {
                    Some((iterate_loss, smoothed_loss)) => self.detector.observe(
                        &self.weights,
                        self.weights_divisor,
                        iterate_loss,
                        smoothed_loss,
                        t,
                    ),
                    None => self.detector.fixed_start == Some(t),
                };
                if triggered {
                    self.avg_start = Some(t);
                    self.detector.release();
                }
            }
        }

        if self.weights_divisor > ANCHOR_LIMIT
            || self.avg_divisor > ANCHOR_LIMIT
            || self.weights_divisor.recip() < 1e-100
        {
            self.re_anchor();
        }
        Ok(())
    }

    /// (θ_t, θ̄_t). Before the first averaged step, θ̄ = θ.
    pub fn recover(&self) -> (LinearModel, LinearModel) {
        instrument::add_touches(2 * self.weights.len());
        let inv = 1.0 / self.weights_divisor;
        let theta: Vec<f64> = self.weights.iter().map(|&u| u * inv).collect();
        let theta_bar: Vec<f64> = if self.averaged_steps() >= 1 {
            self.weights
                .iter()
                .zip(&self.avg_weights)
                .map(|(&u, &h)| (self.avg_fraction * u + h) / self.avg_divisor)
                .collect()
        } else {
            theta.clone()
        };
        (LinearModel::from_raw(theta), LinearModel::from_raw(theta_bar))
    }

    /// Folds the divisors back into the vectors. `recover` of the new state
    /// equals `recover` of the old state in exact arithmetic; the trajectory
    /// continues unchanged. Called automatically when a divisor passes 1e100.
    pub fn re_anchor(&mut self) {
        instrument::add_touches(2 * self.weights.len());
        let inv = 1.0 / self.weights_divisor;
        let averaging = self.averaged_steps() >= 1;
        for i in 0..self.weights.len() {
            let theta = self.weights[i] * inv;
            if averaging {
                self.avg_weights[i] = (self.avg_fraction * self.weights[i] + self.avg_weights[i])
                    / self.avg_divisor;
            }
            self.weights[i] = theta;
        }
        self.weights_divisor = 1.0;
        self.avg_divisor = 1.0;
        self.avg_fraction = 0.0;
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Contract(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// Which update rule drives a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sgd,
    Asgd,
}

/// Where metric checkpoints fall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CheckpointSpec {
    /// Exactly one record per model at the end of the run.
    FinalOnly,
    /// Explicit step numbers.
    Steps(Vec<u64>),
    /// `points` log-spaced checkpoints per pass. When the pass length is not
    /// known up front the steps double instead (1, 2, 4, ...), which gives
    /// the same log-axis density.
    Geometric { points: u32, pass_len: Option<u64> },
}

impl CheckpointSpec {
    pub fn geometric(points: u32) -> Self {
        CheckpointSpec::Geometric {
            points,
            pass_len: None,
        }
    }

    /// Log-spaced steps over 1..=n.
    pub fn log_spaced(points: u32, n: u64) -> Vec<u64> {
        let mut steps: Vec<u64> = (1..=points)
            .map(|k| {
                let frac = k as f64 / points as f64;
                ((n as f64).powf(frac)).round() as u64
            })
            .filter(|&s| s >= 1)
            .collect();
        steps.push(n);
        steps.sort_unstable();
        steps.dedup();
        steps
    }

    fn plan(&self) -> CheckpointPlan {
        match self {
            CheckpointSpec::FinalOnly => CheckpointPlan::List(Vec::new(), 0),
            CheckpointSpec::Steps(steps) => {
                let mut s = steps.clone();
                s.sort_unstable();
                s.dedup();
                CheckpointPlan::List(s, 0)
            }
            CheckpointSpec::Geometric { points, pass_len } => match pass_len {
                Some(n) => CheckpointPlan::PerPass {
                    offsets: Self::log_spaced(*points, *n),
                    pass_len: *n,
                    cursor: 0,
                },
                None => CheckpointPlan::Doubling { next: 1 },
            },
        }
    }
}

enum CheckpointPlan {
    List(Vec<u64>, usize),
    PerPass {
        offsets: Vec<u64>,
        pass_len: u64,
        cursor: u64,
    },
    Doubling {
        next: u64,
    },
}

impl CheckpointPlan {
    fn due(&mut self, step: u64) -> bool {
        match self {
            CheckpointPlan::List(steps, pos) => {
                let mut hit = false;
                while *pos < steps.len() && steps[*pos] <= step {
                    hit |= steps[*pos] == step;
                    *pos += 1;
                }
                hit
            }
            CheckpointPlan::PerPass {
                offsets,
                pass_len,
                cursor,
            } => {
                let within = (step - 1) % *pass_len + 1;
                // Re-walk offsets at each pass boundary.
                if within == 1 {
                    *cursor = 0;
                }
                let mut hit = false;
                while (*cursor as usize) < offsets.len() && offsets[*cursor as usize] <= within {
                    hit |= offsets[*cursor as usize] == within;
                    *cursor += 1;
                }
                hit
            }
            CheckpointPlan::Doubling { next } => {
                if step >= *next {
                    while *next <= step {
                        *next *= 2;
                    }
                    true
                } else {
                    false
                }
            }
        }
    }
}

/// Full configuration of a training run.
#[derive(Clone, Debug)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    pub loss: LossKind,
    pub lambda: f64,
    pub schedule: Schedule,
    pub averaging: AveragingStart,
    pub checkpoints: CheckpointSpec,
}

/// Per-model figures supplied by the caller at each checkpoint.
#[derive(Clone, Copy, Debug)]
pub struct Evaluation {
    pub error_rate: Option<f64>,
    pub cost: f64,
    pub excess_risk: Option<f64>,
}

/// Everything a finished run hands back.
#[derive(Debug)]
pub struct TrainOutcome {
    pub theta: LinearModel,
    pub theta_bar: LinearModel,
    pub records: Vec<(WhichModel, MetricsRecord)>,
    pub samples_seen: u64,
    /// Resolved averaging start, for run headers.
    pub avg_start: Option<u64>,
}

enum TrainerState {
    Sgd(SgdState),
    Asgd(AsgdState),
}

impl TrainerState {
    fn step(&mut self, sample: &Sample) -> Result<()> {
        match self {
            TrainerState::Sgd(s) => s.step(sample),
            TrainerState::Asgd(s) => s.step(sample),
        }
    }

    fn recover(&self) -> (LinearModel, LinearModel) {
        match self {
            TrainerState::Sgd(s) => {
                let theta = s.theta();
                (theta.clone(), theta)
            }
            TrainerState::Asgd(s) => s.recover(),
        }
    }
}

/// Incremental training driver: feed it one stream per pass, then `finish`.
pub struct TrainRun {
    state: TrainerState,
    plan: CheckpointPlan,
    records: Vec<(WhichModel, MetricsRecord)>,
    started: Instant,
    pass_len: Option<u64>,
    samples_seen: u64,
    emit_both: bool,
}

impl TrainRun {
    pub fn new(cfg: &TrainerConfig, dim: usize) -> Result<Self> {
        let state = match cfg.algorithm {
            Algorithm::Sgd => TrainerState::Sgd(SgdState::new(
                dim,
                cfg.schedule,
                cfg.lambda,
                cfg.loss,
            )?),
            Algorithm::Asgd => TrainerState::Asgd(AsgdState::new(
                dim,
                cfg.schedule,
                cfg.lambda,
                cfg.loss,
                cfg.averaging,
            )?),
        };
        let pass_len = match &cfg.checkpoints {
            CheckpointSpec::Geometric { pass_len, .. } => *pass_len,
            _ => None,
        };
        Ok(Self {
            state,
            plan: cfg.checkpoints.plan(),
            records: Vec::new(),
            started: Instant::now(),
            pass_len,
            samples_seen: 0,
            emit_both: matches!(cfg.algorithm, Algorithm::Asgd),
        })
    }

    /// Feeds one pass worth of samples. Returns how many were consumed.
    pub fn run_pass(
        &mut self,
        stream: impl Iterator<Item = Result<Sample>>,
        evaluate: &mut dyn FnMut(WhichModel, &LinearModel) -> Result<Evaluation>,
    ) -> Result<u64> {
        let mut consumed = 0u64;
        for sample in stream {
            let sample = sample?;
            self.state.step(&sample)?;
            consumed += 1;
            self.samples_seen += 1;
            if self.plan.due(self.samples_seen) {
                self.emit(evaluate)?;
            }
        }
        if self.pass_len.is_none() {
            self.pass_len = Some(consumed);
        }
        Ok(consumed)
    }

    fn emit(
        &mut self,
        evaluate: &mut dyn FnMut(WhichModel, &LinearModel) -> Result<Evaluation>,
    ) -> Result<()> {
        let elapsed = self.started.elapsed().as_secs_f64();
        let passes = match self.pass_len {
            Some(n) if n > 0 => self.samples_seen as f64 / n as f64,
            _ => f64::NAN, // backfilled once the pass length is known
        };
        let (theta, theta_bar) = self.state.recover();
        let mut pairs = vec![(WhichModel::Theta, &theta)];
        if self.emit_both {
            pairs.push((WhichModel::ThetaBar, &theta_bar));
        }
        for (which, model) in pairs {
            let eval = evaluate(which, model)?;
            self.records.push((
                which,
                MetricsRecord {
                    step: self.samples_seen,
                    passes,
                    test_error_rate: eval.error_rate,
                    test_cost: eval.cost,
                    excess_risk: eval.excess_risk,
                    elapsed_seconds: elapsed,
                },
            ));
        }
        Ok(())
    }

    /// Emits the final record (unless the last step already produced one)
    /// and backfills the `passes` column for records emitted before the
    /// pass length was known.
    pub fn finish(
        mut self,
        evaluate: &mut dyn FnMut(WhichModel, &LinearModel) -> Result<Evaluation>,
    ) -> Result<TrainOutcome> {
        if self.samples_seen == 0 {
            return Err(Error::Data("empty training stream".into()));
        }
        let already_final = self
            .records
            .last()
            .is_some_and(|(_, r)| r.step == self.samples_seen);
        if !already_final {
            self.emit(evaluate)?;
        }
        if let Some(n) = self.pass_len {
            if n > 0 {
                for (_, record) in &mut self.records {
                    if record.passes.is_nan() {
                        record.passes = record.step as f64 / n as f64;
                    }
                }
            }
        }
        let (theta, theta_bar) = self.state.recover();
        let avg_start = match &self.state {
            TrainerState::Asgd(s) => s.avg_start(),
            TrainerState::Sgd(_) => None,
        };
        Ok(TrainOutcome {
            theta,
            theta_bar,
            records: self.records,
            samples_seen: self.samples_seen,
            avg_start,
        })
    }
}

/// Single-pass convenience wrapper around [`TrainRun`].
pub fn train_one_pass(
    stream: impl Iterator<Item = Result<Sample>>,
    cfg: &TrainerConfig,
    dim: usize,
    evaluate: &mut dyn FnMut(WhichModel, &LinearModel) -> Result<Evaluation>,
) -> Result<TrainOutcome> {
    let mut run = TrainRun::new(cfg, dim)?;
    run.run_pass(stream, evaluate)?;
    run.finish(evaluate)
}
