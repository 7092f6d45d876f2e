//! Federated fusion of the UEs' local Q-networks.
//!
//! Fusion is a convex combination of flat weight vectors. Accumulation runs
//! in `f64` whatever the model precision, and each fused coordinate is
//! clamped into the range spanned by the inputs so rounding can never push
//! it outside the convex hull. Equal coefficients always take the plain-mean
//! path, which makes the different rules agree bit for bit in that case.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::DqnAgent;
use crate::env::SuccessTracker;
use crate::error::{FrlError, Result};
use crate::nn::WeightVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingRule {
    /// Weighted by replay memory size.
    Memory,
    /// Weighted by channel-assignment success rate.
    Success,
    Uniform,
}

impl std::fmt::Display for AveragingRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AveragingRule::Memory => "memory",
            AveragingRule::Success => "success",
            AveragingRule::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragingEvent<S> {
    /// 1-based.
    pub event_index: usize,
    pub rule: AveragingRule,
    /// True when the rule's coefficients were all zero and the uniform mean was used.
    pub fallback: bool,
    /// Normalized coefficients actually applied.
    pub coefficients: Vec<f64>,
    pub weights_in: Vec<WeightVector<S>>,
    pub weights_out: WeightVector<S>,
}

impl<S: Scalar> AveragingEvent<S> {
    pub fn input_checksums(&self) -> Vec<String> {
        self.weights_in.iter().map(|w| checksum(w.as_slice())).collect()
    }

    pub fn output_checksum(&self) -> String {
        checksum(self.weights_out.as_slice())
    }
}

/// First 8 bytes (hex) of SHA-256 over the weights as little-endian `f32`.
pub fn checksum<S: Scalar>(weights: &[S]) -> String {
    let mut h = Sha256::new();
    for w in weights {
        h.update(w.to_le_f32_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

fn check_shapes<S>(models: &[&[S]]) {
    assert!(!models.is_empty(), "no models to average");
    let len = models[0].len();
    assert!(models.iter().all(|m| m.len() == len), "models have different lengths");
}

/// Unweighted elementwise mean.
pub fn average_uniform<S: Scalar>(models: &[&[S]]) -> WeightVector<S> {
    check_shapes(models);
    let n = models.len() as f64;
    fuse_with(models, |j| models.iter().map(|m| m[j].as_f64()).sum::<f64>() / n)
}

/// `sum_i c_i W_i / sum_i c_i` for non-negative coefficients.
pub fn weighted_average<S: Scalar>(models: &[&[S]], coefficients: &[f64]) -> Result<WeightVector<S>> {
    check_shapes(models);
    assert_eq!(models.len(), coefficients.len(), "one coefficient per model");
    if coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(FrlError::Domain(format!("coefficients must be finite and non-negative: {coefficients:?}")));
    }
    let total: f64 = coefficients.iter().sum();
    if total == 0.0 {
        return Err(FrlError::DegenerateWeights);
    }
    if coefficients.windows(2).all(|w| w[0] == w[1]) {
        return Ok(average_uniform(models));
    }
    let c: Vec<f64> = coefficients.iter().map(|x| x / total).collect();
    Ok(fuse_with(models, |j| models.iter().zip(&c).map(|(m, &ci)| ci * m[j].as_f64()).sum()))
}

/// Replay-size weighted mean. Errors when every memory is empty.
pub fn average_by_memory<S: Scalar>(models: &[&[S]], memory_sizes: &[usize]) -> Result<WeightVector<S>> {
    let c: Vec<f64> = memory_sizes.iter().map(|&s| s as f64).collect();
    weighted_average(models, &c)
}

/// Success-rate weighted mean; the plain mean when every rate is zero.
pub fn average_by_success<S: Scalar>(models: &[&[S]], etas: &[f64]) -> Result<WeightVector<S>> {
    match weighted_average(models, etas) {
        Err(FrlError::DegenerateWeights) => Ok(average_uniform(models)),
        other => other,
    }
}

fn fuse_with<S: Scalar>(models: &[&[S]], value: impl Fn(usize) -> f64) -> WeightVector<S> {
    (0..models[0].len())
        .map(|j| {
            let (lo, hi) = models.iter().fold((S::infinity(), S::neg_infinity()), |(lo, hi), m| (lo.min(m[j]), hi.max(m[j])));
            S::lit(value(j)).max(lo).min(hi)
        })
        .collect::<Vec<S>>()
        .into()
}

/// Collects every agent's evaluation weights, fuses them under `rule` and
/// broadcasts the result into both networks of every agent.
pub fn run_averaging_round<S: Scalar>(
    agents: &mut [DqnAgent<S>],
    rule: AveragingRule,
    tracker: &SuccessTracker,
    event_index: usize,
) -> Result<AveragingEvent<S>> {
    let weights_in: Vec<WeightVector<S>> = agents.iter().map(|a| a.eval_net().weights().clone()).collect();
    let models: Vec<&[S]> = weights_in.iter().map(|w| w.as_slice()).collect();
    let raw: Vec<f64> = match rule {
        AveragingRule::Memory => agents.iter().map(|a| a.memory().len() as f64).collect(),
        AveragingRule::Success => {
            let etas = tracker.rates();
            assert_eq!(etas.len(), agents.len(), "success tracker does not match the agent count");
            etas
        }
        AveragingRule::Uniform => vec![1.0; agents.len()],
    };
    let (weights_out, coefficients, fallback) = match weighted_average(&models, &raw) {
        Ok(w) => {
            let total: f64 = raw.iter().sum();
            (w, raw.iter().map(|c| c / total).collect(), false)
        }
        Err(FrlError::DegenerateWeights) => {
            (average_uniform(&models), vec![1.0 / agents.len() as f64; agents.len()], true)
        }
        Err(e) => return Err(e),
    };
    for a in agents.iter_mut() {
        a.load_weights(weights_out.as_slice());
    }
    Ok(AveragingEvent { event_index, rule, fallback, coefficients, weights_in, weights_out })
}

/// Epochs (0-based) after which an averaging round runs: `n_a` rounds spaced
/// `P = floor(K / n_a)` epochs apart, each in the middle of its period, so the
/// last fused model still gets `P - P/2` epochs of local training.
pub fn averaging_epochs(total_epochs: usize, averaging_times: usize) -> Vec<usize> {
    if averaging_times == 0 || total_epochs == 0 {
        return Vec::new();
    }
    let period = (total_epochs / averaging_times).max(1);
    (1..=averaging_times.min(total_epochs)).map(|k| k * period - period / 2 - 1).collect()
}
