use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use super::config::{ExperimentConfig, Scheme};
use super::metrics::{write_metrics_csv, MetricsRecord};
use crate::agent::Transition;
use crate::env::{Action, Environment, NetworkConfig, Observation};
use crate::error::Result;
use crate::fed::{run_averaging_round, AveragingEvent};
use crate::nn::{write_snapshot, Mlp};
use crate::oracle::{assign_hungarian, build_utility_matrix, comm_cost_crl, comm_cost_frl, CommCostReport};
use crate::{DqnAgent32, Real};

/// Agent `i` draws from stream `i + 1` of the run seed; the environment owns
/// its own generator seeded with the run seed, so no scheme changes the
/// random sequence seen by any component.
pub fn agent_stream(ue: usize) -> u64 {
    ue as u64 + 1
}

pub fn to_real(obs: &Observation) -> Vec<Real> {
    obs.as_slice().iter().map(|&v| v as Real).collect()
}

/// Upper bound on the system EE attainable on the current channel realization.
pub fn oracle_bound(env: &Environment) -> f64 {
    let u = build_utility_matrix(&env.gains(), env.config());
    assign_hungarian(&u.u_star).total
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub metrics: Vec<MetricsRecord>,
    pub events: Vec<AveragingEvent<Real>>,
    /// Epoch after which each event ran.
    pub event_epochs: Vec<usize>,
    pub agents: Vec<DqnAgent32>,
}

impl TrainingRun {
    pub fn eval_nets(&self) -> Vec<Mlp<Real>> {
        self.agents.iter().map(|a| a.eval_net().clone()).collect()
    }

    pub fn comm_cost(&self) -> CommCostReport {
        comm_cost_report(&self.config, self.events.len() as u64)
    }
}

pub fn comm_cost_report(config: &ExperimentConfig, averaging_rounds: u64) -> CommCostReport {
    let n = config.network.num_ues;
    let obs = config.network.obs_dim() as u64;
    let params = config.mlp_spec().map_or(0, |s| s.param_count()) as u64;
    CommCostReport::new(
        config.epochs as u64,
        config.network.steps_per_epoch as u64,
        averaging_rounds,
        vec![obs; n],
        vec![params; n],
    )
}

/// Trains one agent per UE for `config.epochs` epochs on seed `seed`.
pub fn run_training(config: &ExperimentConfig, seed: u64) -> Result<TrainingRun> {
    run_training_with(config, seed, |_| {})
}

/// As [`run_training`], calling `on_epoch` with each record as it is produced.
pub fn run_training_with(
    config: &ExperimentConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&MetricsRecord),
) -> Result<TrainingRun> {
    config.validate()?;
    let spec = config.mlp_spec()?;
    let net: &NetworkConfig = &config.network;
    let num_ues = net.num_ues;
    let steps = net.steps_per_epoch;
    let space = net.action_space();
    let obs_dims = vec![net.obs_dim() as u64; num_ues];
    let model_sizes = vec![spec.param_count() as u64; num_ues];
    let schedule = config.averaging_schedule();
    let rule = config.scheme.averaging_rule();

    let mut env = Environment::new(net.clone(), seed)?;
    let mut agents: Vec<DqnAgent32> =
        (0..num_ues).map(|i| DqnAgent32::new(spec.clone(), config.train.clone(), seed, agent_stream(i))).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut events = Vec::new();
    let mut event_epochs = Vec::new();

    for epoch in 0..config.epochs {
        let eps = config.train.epsilon(epoch);
        let frac = epoch as f64 / config.epochs as f64;
        let mut obs: Vec<Vec<Real>> = env.observations(frac, eps).iter().map(to_real).collect();
        let mut reward_sum = 0.0;
        let mut ee_sum = 0.0;
        let mut oracle_sum = 0.0;
        let mut loss_sum = vec![0.0f64; num_ues];
        let mut loss_n = vec![0usize; num_ues];
        for _ in 0..steps {
            let idx: Vec<usize> = agents.iter_mut().zip(&obs).map(|(a, o)| a.select_action(o, eps)).collect();
            let actions: Vec<Action> = idx.iter().map(|&k| space.decode(k)).collect();
            oracle_sum += oracle_bound(&env);
            let out = env.step(&actions, frac, eps);
            reward_sum += out.reward;
            ee_sum += out.system_ee;
            let next: Vec<Vec<Real>> = out.next_observations.iter().map(to_real).collect();
            for (i, agent) in agents.iter_mut().enumerate() {
                let t = Transition {
                    obs: std::mem::take(&mut obs[i]),
                    action: idx[i],
                    reward: out.reward as Real,
                    next_obs: next[i].clone(),
                };
                if let Some(l) = agent.observe(t) {
                    loss_sum[i] += f64::from(l);
                    loss_n[i] += 1;
                }
            }
            obs = next;
        }
        env.advance_epoch();

        if let Some(rule) = rule.filter(|_| schedule.binary_search(&epoch).is_ok()) {
            events.push(run_averaging_round(&mut agents, rule, env.tracker(), events.len())?);
            event_epochs.push(epoch);
        }

        let record = MetricsRecord {
            epoch,
            mean_reward: reward_sum / steps as f64,
            losses: loss_sum.iter().zip(&loss_n).map(|(&s, &n)| (n > 0).then(|| s / n as f64)).collect(),
            etas: env.success_rates(),
            system_ee: ee_sum / steps as f64,
            oracle_ee: oracle_sum / steps as f64,
            c_crl_cum: comm_cost_crl(epoch as u64 + 1, steps as u64, &obs_dims),
            c_frl_cum: comm_cost_frl(events.len() as u64, &model_sizes),
        };
        on_epoch(&record);
        metrics.push(record);
    }

    Ok(TrainingRun { config: config.clone(), seed, metrics, events, event_epochs, agents })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'a str,
    scheme: Scheme,
    seed: u64,
    seeds: &'a [u64],
    param_count: usize,
    averaging_epochs: &'a [usize],
    comm_cost: CommCostReport,
    config: &'a ExperimentConfig,
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const AUDIT_FILE: &str = "averaging.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const FUSED_CHECKPOINT: &str = "fused.frlw";

pub fn agent_checkpoint_name(ue: usize) -> String {
    format!("agent_{ue}.frlw")
}

/// Writes `metrics.csv`, `manifest.json`, the averaging audit log and the
/// weight snapshots of `run` into `dir`.
pub fn write_run(run: &TrainingRun, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join(CHECKPOINT_DIR))?;
    write_metrics_csv(&run.metrics, BufWriter::new(File::create(dir.join(METRICS_FILE))?))?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        scheme: run.config.scheme,
        seed: run.seed,
        seeds: &run.config.seeds,
        param_count: run.config.mlp_spec()?.param_count(),
        averaging_epochs: &run.event_epochs,
        comm_cost: run.comm_cost(),
        config: &run.config,
    };
    let mut f = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    std::io::Write::write_all(&mut f, b"\n")?;

    write_audit_log(run, dir)?;

    for (i, agent) in run.agents.iter().enumerate() {
        let mut f = BufWriter::new(File::create(dir.join(CHECKPOINT_DIR).join(agent_checkpoint_name(i)))?);
        write_snapshot(agent.eval_net(), &mut f)?;
    }
    if let Some(last) = run.events.last() {
        let fused = Mlp::from_weights(run.config.mlp_spec()?, last.weights_out.clone())?;
        let mut f = BufWriter::new(File::create(dir.join(CHECKPOINT_DIR).join(FUSED_CHECKPOINT))?);
        write_snapshot(&fused, &mut f)?;
    }
    Ok(())
}

/// Config echoed into a run directory's manifest.
pub fn load_run_config(dir: &Path) -> Result<ExperimentConfig> {
    #[derive(serde::Deserialize)]
    struct Echo {
        config: ExperimentConfig,
    }
    let path = dir.join(MANIFEST_FILE);
    let file = File::open(&path).map_err(|source| crate::error::FrlError::Load { path, source })?;
    let echo: Echo = serde_json::from_reader(std::io::BufReader::new(file))?;
    Ok(echo.config)
}

fn write_audit_log(run: &TrainingRun, dir: &Path) -> Result<()> {
    let n = run.config.network.num_ues;
    let mut w = csv::Writer::from_path(dir.join(AUDIT_FILE))?;
    let mut header = vec!["event".to_string(), "epoch".into(), "rule".into(), "fallback".into()];
    header.extend((0..n).map(|i| format!("coef_ue{i}")));
    header.extend((0..n).map(|i| format!("in_sha_ue{i}")));
    header.push("out_sha".into());
    w.write_record(&header)?;
    for (ev, &epoch) in run.events.iter().zip(&run.event_epochs) {
        let mut row = vec![ev.event_index.to_string(), epoch.to_string(), ev.rule.to_string(), ev.fallback.to_string()];
        row.extend(ev.coefficients.iter().map(f64::to_string));
        row.extend(ev.input_checksums());
        row.push(ev.output_checksum());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny(scheme: Scheme) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk().with_scheme(scheme);
        cfg.epochs = 8;
        cfg.network.steps_per_epoch = 50;
        cfg.hidden_layers = vec![8];
        cfg.train.epsilon_anneal_epochs = 4;
        if scheme != Scheme::Marl {
            cfg.averaging_times = 2;
        }
        cfg
    }

    #[test]
    fn marl_never_averages() {
        let run = run_training(&tiny(Scheme::Marl), 3).unwrap();
        assert!(run.events.is_empty());
        assert_eq!(run.metrics.len(), 8);
        assert!(run.metrics.iter().all(|r| r.c_frl_cum == 0));
    }

    #[test]
    fn frl_suc_uses_success_rates() {
        let run = run_training(&tiny(Scheme::FrlSuc), 3).unwrap();
        assert_eq!(run.event_epochs, vec![1, 5]);
        let ev = &run.events[1];
        assert_eq!(ev.rule, crate::fed::AveragingRule::Success);
        let etas = &run.metrics[5].etas;
        let total: f64 = etas.iter().sum();
        if !ev.fallback {
            for (c, e) in ev.coefficients.iter().zip(etas) {
                assert!((c - e / total).abs() < 1e-12);
            }
        }
        // local training after the last round personalizes the fused model again
        for a in &run.agents {
            assert_ne!(a.eval_net().weights(), &ev.weights_out);
        }
        assert_ne!(run.agents[0].eval_net().weights(), run.agents[1].eval_net().weights());
    }

    #[test]
    fn metrics_are_in_range() {
        let run = run_training(&tiny(Scheme::Frl), 5).unwrap();
        for r in &run.metrics {
            assert!(r.mean_reward >= 0.0 && r.system_ee >= 0.0 && r.oracle_ee > 0.0);
            assert!(r.system_ee <= r.oracle_ee);
            assert!(r.etas.iter().all(|e| (0.0..=1.0).contains(e)));
        }
        let last = run.metrics.last().unwrap();
        let cost = run.comm_cost();
        assert_eq!(last.c_crl_cum, cost.c_crl);
        assert_eq!(last.c_frl_cum, cost.c_frl);
    }

    #[test]
    fn marl_is_a_prefix_of_frl() {
        let marl = run_training(&tiny(Scheme::Marl), 11).unwrap();
        let frl = run_training(&tiny(Scheme::FrlSuc), 11).unwrap();
        let first = frl.event_epochs[0];
        for e in 0..=first {
            let (a, b) = (&marl.metrics[e], &frl.metrics[e]);
            assert_eq!((a.mean_reward, &a.losses, &a.etas), (b.mean_reward, &b.losses, &b.etas));
        }
        assert_ne!(marl.metrics[first + 1..], frl.metrics[first + 1..]);
    }
}
