//! Per-epoch training metrics, their CSV form and the trend summaries derived from them.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FrlError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    /// Mean global reward over the epoch's steps.
    pub mean_reward: f64,
    /// Mean loss per agent over the epoch's gradient steps; `None` before training starts.
    pub losses: Vec<Option<f64>>,
    /// Lifetime success rate per UE at the end of the epoch.
    pub etas: Vec<f64>,
    /// Mean rewarded system EE over the epoch (bits/J).
    pub system_ee: f64,
    /// Mean centralized upper bound over the same channel realizations.
    pub oracle_ee: f64,
    pub c_crl_cum: u64,
    pub c_frl_cum: u64,
}

impl MetricsRecord {
    /// Mean over agents that trained this epoch.
    pub fn mean_loss(&self) -> Option<f64> {
        let vals: Vec<f64> = self.losses.iter().flatten().copied().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub fn metrics_header(num_ues: usize) -> Vec<String> {
    let mut h = vec!["epoch".to_string(), "mean_reward".to_string()];
    h.extend((0..num_ues).map(|i| format!("loss_ue{i}")));
    h.extend((0..num_ues).map(|i| format!("eta_ue{i}")));
    h.extend(["system_ee", "oracle_ee", "c_crl_cum", "c_frl_cum"].map(String::from));
    h
}

/// Writes the header and one row per record. Floats use the shortest
/// representation that round-trips, so equal runs give equal bytes.
pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let num_ues = records.first().map_or(0, |r| r.losses.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(metrics_header(num_ues))?;
    for r in records {
        let mut row = vec![r.epoch.to_string(), r.mean_reward.to_string()];
        row.extend(r.losses.iter().map(|l| l.map_or_else(String::new, |v| v.to_string())));
        row.extend(r.etas.iter().map(f64::to_string));
        row.push(r.system_ee.to_string());
        row.push(r.oracle_ee.to_string());
        row.push(r.c_crl_cum.to_string());
        row.push(r.c_frl_cum.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let num_ues = header.iter().filter(|h| h.starts_with("loss_ue")).count();
    if header.len() != 6 + 2 * num_ues || header.iter().collect::<Vec<_>>() != metrics_header(num_ues) {
        return Err(FrlError::Config(format!("unexpected metrics header: {header:?}")));
    }
    let float = |s: &str| -> Result<f64> { s.parse().map_err(|_| FrlError::Config(format!("bad number {s:?}"))) };
    let int = |s: &str| -> Result<u64> { s.parse().map_err(|_| FrlError::Config(format!("bad integer {s:?}"))) };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let losses = (0..num_ues)
            .map(|i| {
                let s = &row[2 + i];
                if s.is_empty() { Ok(None) } else { float(s).map(Some) }
            })
            .collect::<Result<_>>()?;
        let etas = (0..num_ues).map(|i| float(&row[2 + num_ues + i])).collect::<Result<_>>()?;
        let base = 2 + 2 * num_ues;
        out.push(MetricsRecord {
            epoch: int(&row[0])? as usize,
            mean_reward: float(&row[1])?,
            losses,
            etas,
            system_ee: float(&row[base])?,
            oracle_ee: float(&row[base + 1])?,
            c_crl_cum: int(&row[base + 2])?,
            c_frl_cum: int(&row[base + 3])?,
        });
    }
    Ok(out)
}

/// Trend figures of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    /// Mean reward over the first tenth of the epochs.
    pub early_reward: f64,
    /// Mean reward over the last tenth of the epochs.
    pub final_reward: f64,
    /// First epoch at which the trailing moving average of the reward reaches
    /// 90% of `final_reward`.
    pub epochs_to_90pct: Option<usize>,
    /// Mean agent loss over the last tenth of the epochs.
    pub final_loss: Option<f64>,
    pub final_system_ee: f64,
    pub final_oracle_ee: f64,
    pub final_etas: Vec<f64>,
}

/// Number of epochs in a tenth of the run (at least one).
pub fn decile_len(epochs: usize) -> usize {
    epochs.div_ceil(10).max(1)
}

/// Trailing window of the smoothed reward curve: a hundredth of the run.
pub fn smoothing_window(epochs: usize) -> usize {
    (epochs / 100).max(1)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { 0.0 } else { s / n as f64 }
}

pub fn trailing_mean(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        acc += x;
        if i >= window {
            acc -= xs[i - window];
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}

pub fn summarize(records: &[MetricsRecord]) -> TrainingSummary {
    let k = records.len();
    let d = decile_len(k).min(k);
    let head = &records[..d];
    let tail = &records[k - d..];
    let final_reward = mean(tail.iter().map(|r| r.mean_reward));
    let rewards: Vec<f64> = records.iter().map(|r| r.mean_reward).collect();
    let smoothed = trailing_mean(&rewards, smoothing_window(k));
    let epochs_to_90pct = if final_reward > 0.0 {
        smoothed.iter().position(|&r| r >= 0.9 * final_reward)
    } else {
        None
    };
    let tail_losses: Vec<f64> = tail.iter().filter_map(MetricsRecord::mean_loss).collect();
    TrainingSummary {
        epochs: k,
        early_reward: mean(head.iter().map(|r| r.mean_reward)),
        final_reward,
        epochs_to_90pct,
        final_loss: (!tail_losses.is_empty()).then(|| mean(tail_losses.iter().copied())),
        final_system_ee: mean(tail.iter().map(|r| r.system_ee)),
        final_oracle_ee: mean(tail.iter().map(|r| r.oracle_ee)),
        final_etas: tail.last().map(|r| r.etas.clone()).unwrap_or_default(),
    }
}
