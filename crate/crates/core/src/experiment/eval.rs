use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::train::{agent_checkpoint_name, oracle_bound, to_real, CHECKPOINT_DIR};
use crate::agent::argmax;
use crate::env::{Action, Environment, Observation};
use crate::error::{FrlError, Result};
use crate::nn::{read_snapshot, Mlp};
use crate::oracle::{assign_hungarian, build_utility_matrix};
use crate::Real;

/// Joint decision rule used during evaluation.
pub trait Policy {
    fn actions(&self, env: &Environment, observations: &[Observation]) -> Vec<Action>;
}

/// Each UE acts greedily on its own network.
pub struct GreedyPolicy<'a> {
    pub nets: &'a [Mlp<Real>],
}

impl Policy for GreedyPolicy<'_> {
    fn actions(&self, env: &Environment, observations: &[Observation]) -> Vec<Action> {
        let space = env.config().action_space();
        self.nets.iter().zip(observations).map(|(net, o)| space.decode(argmax(&net.forward(&to_real(o))))).collect()
    }
}

/// Centralized optimum on the current realization.
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn actions(&self, env: &Environment, _: &[Observation]) -> Vec<Action> {
        let u = build_utility_matrix(&env.gains(), env.config());
        u.actions_for(&assign_hungarian(&u.u_star))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionResult {
    pub index: usize,
    pub env_seed: u64,
    /// Mean system EE over the epoch (bits/J, zero on unrewarded steps).
    pub mean_ee: f64,
    pub mean_oracle_ee: f64,
    /// Fraction of UE-steps without a collision.
    pub success_rate: f64,
    /// Fraction of steps that earned the global reward.
    pub rewarded_rate: f64,
    /// Steps where the policy exceeded the centralized bound.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub noise_dbm: f64,
    pub distributions: Vec<DistributionResult>,
    pub mean_ee: f64,
    pub mean_oracle_ee: f64,
    pub success_rate: f64,
    pub steps: usize,
    pub violations: usize,
}

/// Fingerprint fed to the networks during evaluation: end of training, final
/// exploration rate.
pub fn eval_fingerprint(config: &ExperimentConfig) -> (f64, f64) {
    (1.0, config.train.epsilon(config.epochs))
}

/// Rolls `policy` out for one epoch on each of `config.eval_distributions`
/// random placements and compares it with the centralized bound step by step.
pub fn run_evaluation(policy: &impl Policy, config: &ExperimentConfig) -> Result<EvalReport> {
    config.network.validate()?;
    let (frac, eps) = eval_fingerprint(config);
    let steps = config.network.steps_per_epoch;
    let num_ues = config.network.num_ues;
    let mut distributions = Vec::with_capacity(config.eval_distributions);
    for d in 0..config.eval_distributions {
        let env_seed = config.eval_seed.wrapping_add(d as u64);
        let mut env = Environment::new(config.network.clone(), env_seed)?;
        let mut obs = env.observations(frac, eps);
        let (mut ee, mut bound, mut ok, mut rewarded, mut violations) = (0.0, 0.0, 0usize, 0usize, 0usize);
        for _ in 0..steps {
            let actions = policy.actions(&env, &obs);
            let step_bound = oracle_bound(&env);
            let out = env.step(&actions, frac, eps);
            if out.system_ee > step_bound {
                violations += 1;
            }
            ee += out.system_ee;
            bound += step_bound;
            ok += out.per_ue_success.iter().filter(|&&s| s).count();
            rewarded += usize::from(out.reward > 0.0);
            obs = out.next_observations;
        }
        distributions.push(DistributionResult {
            index: d,
            env_seed,
            mean_ee: ee / steps as f64,
            mean_oracle_ee: bound / steps as f64,
            success_rate: ok as f64 / (steps * num_ues) as f64,
            rewarded_rate: rewarded as f64 / steps as f64,
            violations,
        });
    }
    let n = distributions.len().max(1) as f64;
    Ok(EvalReport {
        noise_dbm: config.network.noise_dbm,
        mean_ee: distributions.iter().map(|d| d.mean_ee).sum::<f64>() / n,
        mean_oracle_ee: distributions.iter().map(|d| d.mean_oracle_ee).sum::<f64>() / n,
        success_rate: distributions.iter().map(|d| d.success_rate).sum::<f64>() / n,
        steps: distributions.len() * steps,
        violations: distributions.iter().map(|d| d.violations).sum(),
        distributions,
    })
}

/// Loads `agent_<i>.frlw` for every UE from `dir` (a run directory or its
/// checkpoint subdirectory) and checks the topology against `config`.
pub fn load_checkpoints(dir: &Path, config: &ExperimentConfig) -> Result<Vec<Mlp<Real>>> {
    let base = if dir.join(CHECKPOINT_DIR).is_dir() { dir.join(CHECKPOINT_DIR) } else { dir.to_path_buf() };
    let spec = config.mlp_spec()?;
    (0..config.network.num_ues)
        .map(|i| {
            let path = base.join(agent_checkpoint_name(i));
            let file = File::open(&path).map_err(|source| FrlError::Load { path: path.clone(), source })?;
            let net: Mlp<Real> = read_snapshot(BufReader::new(file))?;
            if net.spec() != &spec {
                return Err(FrlError::Snapshot(format!(
                    "{} has layers {:?}, config expects {:?}",
                    path.display(),
                    net.spec().layer_sizes,
                    spec.layer_sizes
                )));
            }
            Ok(net)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::Scheme;
    use crate::experiment::train::{run_training, write_run};

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk().with_scheme(Scheme::Marl);
        cfg.eval_distributions = 3;
        cfg.network.steps_per_epoch = 20;
        cfg
    }

    #[test]
    fn oracle_evaluates_to_its_own_bound() {
        let r = run_evaluation(&OraclePolicy, &small()).unwrap();
        for d in &r.distributions {
            assert!((d.mean_ee - d.mean_oracle_ee).abs() <= 1e-9 * d.mean_oracle_ee, "{d:?}");
            assert_eq!(d.success_rate, 1.0);
        }
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn evaluation_is_repeatable() {
        let cfg = small();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let nets: Vec<_> = (0..4).map(|_| Mlp::he_uniform(cfg.mlp_spec().unwrap(), &mut rng)).collect();
        let a = run_evaluation(&GreedyPolicy { nets: &nets }, &cfg).unwrap();
        let b = run_evaluation(&GreedyPolicy { nets: &nets }, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.violations, 0);
    }

    #[test]
    fn low_noise_raises_the_bound() {
        let cfg = small();
        let base = run_evaluation(&OraclePolicy, &cfg).unwrap();
        let ln = run_evaluation(&OraclePolicy, &cfg.low_noise()).unwrap();
        assert_eq!(ln.noise_dbm, -110.0);
        assert!(ln.mean_oracle_ee > base.mean_oracle_ee);
    }

    #[test]
    fn checkpoints_round_trip_through_disk() {
        let mut cfg = small();
        cfg.epochs = 2;
        cfg.hidden_layers = vec![8];
        let run = run_training(&cfg, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run(&run, dir.path()).unwrap();
        assert_eq!(crate::experiment::load_run_config(dir.path()).unwrap(), cfg);
        let nets = load_checkpoints(dir.path(), &cfg).unwrap();
        for (n, a) in nets.iter().zip(&run.agents) {
            assert_eq!(n.weights(), a.eval_net().weights());
        }
        let wrong = ExperimentConfig { hidden_layers: vec![9], ..cfg.clone() };
        assert!(matches!(load_checkpoints(dir.path(), &wrong), Err(FrlError::Snapshot(_))));
        assert!(matches!(load_checkpoints(&dir.path().join("missing"), &cfg), Err(FrlError::Load { .. })));
    }
}
