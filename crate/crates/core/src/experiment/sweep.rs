use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scheme};
use super::eval::{run_evaluation, GreedyPolicy};
use super::metrics::summarize;
use super::parallel_map;
use super::train::run_training;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub averaging_times: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub final_loss: Option<f64>,
    pub final_reward: f64,
    pub mean_ee: f64,
    pub mean_oracle_ee: f64,
    pub success_rate: f64,
    pub violations: usize,
}

/// Config of one sweep point: `n_a = 0` falls back to the MARL baseline.
pub fn sweep_point(base: &ExperimentConfig, averaging_times: usize) -> ExperimentConfig {
    if averaging_times == 0 {
        return base.with_scheme(Scheme::Marl);
    }
    let mut cfg = base.clone();
    if cfg.scheme == Scheme::Marl {
        cfg.scheme = Scheme::FrlSuc;
    }
    cfg.averaging_times = averaging_times;
    cfg
}

/// Trains and evaluates every `(n_a, seed)` pair; rows come back in
/// `n_a`-major order regardless of how many workers ran them.
pub fn run_sweep(base: &ExperimentConfig, averaging_times: &[usize], workers: usize) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(usize, u64)> =
        averaging_times.iter().flat_map(|&n| base.seeds.iter().map(move |&s| (n, s))).collect();
    for &n in averaging_times {
        sweep_point(base, n).validate()?;
    }
    parallel_map(&jobs, workers, |&(n, seed)| {
        let cfg = sweep_point(base, n);
        let run = run_training(&cfg, seed)?;
        let summary = summarize(&run.metrics);
        let nets = run.eval_nets();
        let report = run_evaluation(&GreedyPolicy { nets: &nets }, &cfg)?;
        Ok(SweepRow {
            averaging_times: n,
            seed,
            scheme: cfg.scheme,
            final_loss: summary.final_loss,
            final_reward: summary.final_reward,
            mean_ee: report.mean_ee,
            mean_oracle_ee: report.mean_oracle_ee,
            success_rate: report.success_rate,
            violations: report.violations,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
