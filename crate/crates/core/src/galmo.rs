//! Growing gated-expert training for one-to-many mappings.
//!
//! Each sample trains only the expert that already fits it best; that
//! expert's gate learns 1 on the sample and every other gate learns 0. A
//! sample whose best error is an outlier relative to the previous epoch's
//! distribution gets a fresh copy of its best expert instead.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{LayeredNet, NetError, NetKind, NetParams};

/// Growth beyond this many experts aborts training.
pub const HARD_EXPERT_LIMIT: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum GalmoError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("runaway growth: ensemble reached {experts} experts")]
    RunawayGrowth { experts: usize, checkpoint: Box<ExpertEnsemble> },
    #[error("sample {index} has input/output dims {got:?}, ensemble expects {expected:?}")]
    SampleShape { index: usize, expected: (usize, usize), got: (usize, usize) },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GalmoConfig {
    /// Outlier gain on the Q3 − median spread.
    pub w: f64,
    pub max_epoch: usize,
    /// Gate output above which an expert's prediction is used.
    pub gate_threshold: f64,
    /// Reshuffle presentation order every epoch (otherwise dataset order).
    pub reshuffle: bool,
    /// Soft cap on experts; once reached, outliers train the best expert.
    pub max_experts: Option<usize>,
    /// Leading share of `max_epoch` with growth suspended (θ held at +∞),
    /// so transient errors of a still-untrained net are not taken for
    /// one-to-many samples. 0 gives the bare algorithm.
    pub warmup_fraction: f64,
    /// Epochs with growth suspended after every epoch that grew.
    pub settle_epochs: usize,
    /// Absolute error below which a sample is never an outlier.
    pub min_outlier_error: f64,
    /// At most one expert is created per epoch.
    pub single_growth: bool,
}

impl Default for GalmoConfig {
    fn default() -> Self {
        GalmoConfig {
            w: 3.0, max_epoch: 4000, gate_threshold: 0.2, reshuffle: true, max_experts: None,
            warmup_fraction: 0.25,
            settle_epochs: 200,
            min_outlier_error: 0.25,
            single_growth: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl Sample {
    pub fn new(input: Vec<f64>, output: Vec<f64>) -> Self {
        Sample { input, output }
    }
}

/// Paired experts and gates; index `i` of one list goes with index `i` of
/// the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertEnsemble {
    experts: Vec<LayeredNet>,
    gates: Vec<LayeredNet>,
    gate_params: NetParams,
}

/// One expert's answer for an input its gate claims.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub expert: usize,
    pub output: Vec<f64>,
    pub gate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleOutcome {
    /// The best expert (and the gates) were trained.
    Trained { expert: usize },
    /// A copy of `source` was appended as expert `created`.
    Grown { source: usize, created: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    /// Presentation order, as indices into the sample set.
    pub order: Vec<usize>,
    /// Best error of each presented sample, in presentation order.
    pub min_errors: Vec<f64>,
    pub outcomes: Vec<SampleOutcome>,
    /// Threshold to use for the next epoch.
    pub theta: f64,
    pub experts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub theta_history: Vec<f64>,
    pub expert_history: Vec<usize>,
    /// Per-sample best error after the last epoch, indexed like the sample set.
    pub final_errors: Vec<f64>,
}

/// Linear-interpolation quantile of an ascending slice, at position q·(n−1).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty list");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// `median + w·(Q3 − median)` of the per-sample best errors.
pub fn outlier_threshold(errors: &[f64], w: f64) -> f64 {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    median + w * (q3 - median)
}

impl ExpertEnsemble {
    /// A single expert with the given bundle, plus its gate.
    pub fn new<R: Rng + ?Sized>(
        expert_params: NetParams,
        gate_params: NetParams,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> ExpertEnsemble {
        let expert = LayeredNet::new(expert_params, input_dim, output_dim, rng);
        let gate = LayeredNet::new(gate_params, input_dim, 1, rng);
        ExpertEnsemble { experts: vec![expert], gates: vec![gate], gate_params }
    }

    pub fn of_kind<R: Rng + ?Sized>(kind: NetKind, input_dim: usize, output_dim: usize, rng: &mut R) -> ExpertEnsemble {
        ExpertEnsemble::new(kind.default_params(), NetKind::G.default_params(), input_dim, output_dim, rng)
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn experts(&self) -> &[LayeredNet] {
        &self.experts
    }

    pub fn gates(&self) -> &[LayeredNet] {
        &self.gates
    }

    pub fn input_dim(&self) -> usize {
        self.experts[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.experts[0].output_dim()
    }

    fn check_sample(&self, index: usize, s: &Sample) -> Result<(), GalmoError> {
        let expected = (self.input_dim(), self.output_dim());
        let got = (s.input.len(), s.output.len());
        if expected != got {
            return Err(GalmoError::SampleShape { index, expected, got });
        }
        Ok(())
    }

    /// L1 error of every expert on one sample.
    pub fn errors(&self, sample: &Sample) -> Result<Vec<f64>, NetError> {
        self.experts.iter().map(|n| n.l1_error(&sample.input, &sample.output)).collect()
    }

    /// Best expert and its error on one sample (lowest index on ties).
    pub fn best(&self, sample: &Sample) -> Result<(usize, f64), NetError> {
        let errs = self.errors(sample)?;
        let mut best = (0, errs[0]);
        for (i, &e) in errs.iter().enumerate().skip(1) {
            if e < best.1 {
                best = (i, e);
            }
        }
        Ok(best)
    }

    /// Outputs of the experts whose gate exceeds `threshold`, by expert index.
    pub fn predict_all(&self, input: &[f64], threshold: f64) -> Result<Vec<Prediction>, NetError> {
        let mut out = Vec::new();
        for (i, (expert, gate)) in self.experts.iter().zip(&self.gates).enumerate() {
            let g = gate.forward(input)?[0];
            if g > threshold {
                out.push(Prediction { expert: i, output: expert.forward(input)?, gate: g });
            }
        }
        Ok(out)
    }

    /// Output of the expert with the highest gate value.
    pub fn predict_best(&self, input: &[f64]) -> Result<Prediction, NetError> {
        let mut best: Option<(usize, f64)> = None;
        for (i, gate) in self.gates.iter().enumerate() {
            let g = gate.forward(input)?[0];
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((i, g));
            }
        }
        let (i, g) = best.expect("ensemble has at least one expert");
        Ok(Prediction { expert: i, output: self.experts[i].forward(input)?, gate: g })
    }

    /// One pass over `samples` in the given `order`, thresholding growth at
    /// `theta`. Returns the threshold for the next epoch.
    pub fn train_epoch<R: Rng + ?Sized>(
        &mut self,
        samples: &[Sample],
        order: &[usize],
        theta: f64,
        config: &GalmoConfig,
        rng: &mut R,
    ) -> Result<EpochReport, GalmoError> {
        let mut min_errors = Vec::with_capacity(order.len());
        let mut outcomes = Vec::with_capacity(order.len());
        let cap = config.max_experts.unwrap_or(usize::MAX);
        let threshold = theta.max(config.min_outlier_error);
        let mut grown = false;
        for &idx in order {
            let s = &samples[idx];
            self.check_sample(idx, s)?;
            let (best, err) = self.best(s)?;
            min_errors.push(err);
            if err < threshold || self.experts.len() >= cap || (grown && config.single_growth) {
                self.experts[best].backprop(&s.input, &s.output)?;
                for (i, gate) in self.gates.iter_mut().enumerate() {
                    gate.backprop(&s.input, &[if i == best { 1.0 } else { 0.0 }])?;
                }
                outcomes.push(SampleOutcome::Trained { expert: best });
            } else {
                if self.experts.len() >= HARD_EXPERT_LIMIT {
                    return Err(GalmoError::RunawayGrowth { experts: self.experts.len(), checkpoint: Box::new(self.clone()) });
                }
                let mut clone = self.experts[best].clone();
                clone.backprop(&s.input, &s.output)?;
                self.experts.push(clone);
                let mut gate = LayeredNet::new(self.gate_params, self.input_dim(), 1, rng);
                gate.backprop(&s.input, &[1.0])?;
                self.gates.push(gate);
                grown = true;
                outcomes.push(SampleOutcome::Grown { source: best, created: self.experts.len() - 1 });
            }
        }
        let theta = if min_errors.is_empty() { theta } else { outlier_threshold(&min_errors, config.w) };
        Ok(EpochReport { order: order.to_vec(), min_errors, outcomes, theta, experts: self.experts.len() })
    }

    /// Runs `max_epoch` epochs starting from an infinite threshold.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        samples: &[Sample],
        config: &GalmoConfig,
        rng: &mut R,
    ) -> Result<TrainReport, GalmoError> {
        self.train_observed(samples, config, rng, |_, _| {})
    }

    /// As [`ExpertEnsemble::train`], calling `observe(epoch, report)` after
    /// every epoch (epochs numbered from 1).
    pub fn train_observed<R, F>(
        &mut self,
        samples: &[Sample],
        config: &GalmoConfig,
        rng: &mut R,
        mut observe: F,
    ) -> Result<TrainReport, GalmoError>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &EpochReport),
    {
        let mut theta = f64::INFINITY;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut theta_history = Vec::with_capacity(config.max_epoch);
        let mut expert_history = Vec::with_capacity(config.max_epoch);
        let mut hold_until = (config.max_epoch as f64 * config.warmup_fraction).round() as usize;
        for epoch in 1..=config.max_epoch {
            if config.reshuffle {
                order.shuffle(rng);
            }
            let effective = if epoch <= hold_until { f64::INFINITY } else { theta };
            let report = self.train_epoch(samples, &order, effective, config, rng)?;
            if report.outcomes.iter().any(|o| matches!(o, SampleOutcome::Grown { .. })) {
                hold_until = epoch + config.settle_epochs;
            }
            theta = report.theta;
            theta_history.push(theta);
            expert_history.push(report.experts);
            observe(epoch, &report);
        }
        let final_errors = samples
            .iter()
            .map(|s| self.best(s).map(|(_, e)| e))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TrainReport { theta_history, expert_history, final_errors })
    }
}
