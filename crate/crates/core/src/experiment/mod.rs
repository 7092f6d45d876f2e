//! Experiment orchestration: configuration, training runs, evaluation,
//! averaging-count sweeps and the files they produce.

mod config;
mod eval;
mod metrics;
mod sweep;
mod train;

pub use config::{ExperimentConfig, Scheme, LOW_NOISE_DBM, PRESETS};
pub use eval::{
    eval_fingerprint, load_checkpoints, run_evaluation, DistributionResult, EvalReport, GreedyPolicy, OraclePolicy,
    Policy,
};
pub use metrics::{
    decile_len, metrics_header, read_metrics_csv, smoothing_window, summarize, trailing_mean, write_metrics_csv,
    MetricsRecord, TrainingSummary,
};
pub use sweep::{run_sweep, sweep_point, write_sweep_csv, SweepRow};
pub use train::{
    agent_checkpoint_name, agent_stream, comm_cost_report, load_run_config, oracle_bound, run_training, run_training_with, write_run,
    TrainingRun, AUDIT_FILE, CHECKPOINT_DIR, FUSED_CHECKPOINT, MANIFEST_FILE, METRICS_FILE,
};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Applies `f` to every item on up to `workers` scoped threads. Output order
/// matches input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Worker count for independent runs: one per available core.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
