use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::TrainConfig;
use crate::env::NetworkConfig;
use crate::error::{FrlError, Result};
use crate::fed::{averaging_epochs, AveragingRule};
use crate::nn::MlpSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Independent learners, no averaging.
    Marl,
    /// Averaging weighted by replay-memory size.
    Frl,
    /// Averaging weighted by channel-assignment success rate.
    FrlSuc,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Marl, Scheme::Frl, Scheme::FrlSuc];

    pub fn averaging_rule(self) -> Option<AveragingRule> {
        match self {
            Scheme::Marl => None,
            Scheme::Frl => Some(AveragingRule::Memory),
            Scheme::FrlSuc => Some(AveragingRule::Success),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Marl => "marl",
            Scheme::Frl => "frl",
            Scheme::FrlSuc => "frl_suc",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = FrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "marl" => Ok(Scheme::Marl),
            "frl" => Ok(Scheme::Frl),
            "frl_suc" => Ok(Scheme::FrlSuc),
            other => Err(FrlError::Config(format!("unknown scheme {other:?} (expected marl, frl or frl_suc)"))),
        }
    }
}

/// Everything a run needs. Serialized as TOML: top-level experiment keys plus
/// `[network]` and `[train]` sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub epochs: usize,
    /// Number of averaging rounds over the run; must be 0 for `marl`.
    pub averaging_times: usize,
    pub seeds: Vec<u64>,
    /// Random UE placements used by evaluation.
    pub eval_distributions: usize,
    /// Placement `d` of an evaluation uses environment seed `eval_seed + d`.
    pub eval_seed: u64,
    pub hidden_layers: Vec<usize>,
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::full()
    }
}

pub const PRESETS: [&str; 2] = ["full", "desk"];

impl ExperimentConfig {
    /// Full-size configuration: three hidden layers of 512/256/128 units.
    pub fn full() -> Self {
        Self {
            scheme: Scheme::FrlSuc,
            epochs: 6000,
            averaging_times: 8,
            seeds: vec![1],
            eval_distributions: 5,
            eval_seed: 1_000_000,
            hidden_layers: vec![512, 256, 128],
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
        }
    }

    /// Small networks and a shorter horizon for quick local runs. The
    /// exploration anneal keeps the same two-thirds proportion of the run.
    pub fn desk() -> Self {
        Self {
            epochs: 2000,
            seeds: vec![1, 2, 3],
            hidden_layers: vec![64, 32],
            train: TrainConfig { epsilon_anneal_epochs: 1333, ..TrainConfig::default() },
            ..Self::full()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::full()),
            "desk" => Ok(Self::desk()),
            other => Err(FrlError::Config(format!("unknown preset {other:?} (expected one of {PRESETS:?})"))),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| FrlError::Load { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.train.validate()?;
        let bad = |msg: String| Err(FrlError::Config(msg));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if self.scheme == Scheme::Marl && self.averaging_times != 0 {
            return bad(format!("scheme marl never averages, but averaging_times = {}", self.averaging_times));
        }
        if self.averaging_times > self.epochs {
            return bad(format!("averaging_times = {} exceeds epochs = {}", self.averaging_times, self.epochs));
        }
        if self.averaging_times > 0 {
            let steps = self.network.steps_per_epoch as u64;
            let sync = self.train.target_sync_period;
            let period_steps = (self.epochs / self.averaging_times) as u64 * steps;
            if period_steps % sync != 0 {
                return bad(format!(
                    "averaging period of {period_steps} steps is not a multiple of target_sync_period = {sync}"
                ));
            }
            let first = averaging_epochs(self.epochs, self.averaging_times)[0] as u64;
            if (first + 1) * steps % sync != 0 {
                return bad(format!(
                    "first averaging round after step {} is not on a target_sync_period = {sync} boundary",
                    (first + 1) * steps
                ));
            }
        }
        Ok(())
    }

    pub fn mlp_spec(&self) -> Result<MlpSpec> {
        MlpSpec::dqn(self.network.obs_dim(), &self.hidden_layers, self.network.action_space().size())
    }

    /// 0-based epochs at whose end an averaging round runs.
    pub fn averaging_schedule(&self) -> Vec<usize> {
        match self.scheme {
            Scheme::Marl => Vec::new(),
            _ => averaging_epochs(self.epochs, self.averaging_times),
        }
    }

    /// Same config with the scheme switched; `marl` also zeroes the averaging count.
    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        let mut cfg = self.clone();
        cfg.scheme = scheme;
        if scheme == Scheme::Marl {
            cfg.averaging_times = 0;
        }
        cfg
    }

    /// Low-noise variant used for robustness evaluation.
    pub fn low_noise(&self) -> Self {
        let mut cfg = self.clone();
        cfg.network.noise_dbm = LOW_NOISE_DBM;
        cfg
    }
}

pub const LOW_NOISE_DBM: f64 = -110.0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            ExperimentConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(ExperimentConfig::preset("huge").is_err());
    }

    #[test]
    fn full_preset_matches_default_network_size() {
        assert_eq!(ExperimentConfig::full().mlp_spec().unwrap().param_count(), 172_452);
    }

    #[test]
    fn marl_with_averaging_is_rejected() {
        let cfg = ExperimentConfig { scheme: Scheme::Marl, ..ExperimentConfig::desk() };
        assert!(matches!(cfg.validate(), Err(FrlError::Config(_))));
        cfg.with_scheme(Scheme::Marl).validate().unwrap();
    }

    #[test]
    fn averaging_period_must_align_with_target_sync() {
        let mut cfg = ExperimentConfig::desk();
        cfg.network.steps_per_epoch = 10;
        cfg.averaging_times = 7; // floor(2000 / 7) * 10 = 2850
        assert!(cfg.validate().is_err());
        cfg.averaging_times = 8; // period 2500 steps, but the first round ends at step 1250
        assert!(cfg.validate().is_err());
        cfg.averaging_times = 4; // period 5000, first round at 2500
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::desk();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str("scheme = \"frl\"\nepochs = 40\n[network]\nnoise_dbm = -110.0\n").unwrap();
        assert_eq!(cfg.scheme, Scheme::Frl);
        assert_eq!(cfg.epochs, 40);
        assert_eq!(cfg.network.noise_dbm, -110.0);
        assert_eq!(cfg.network.num_ues, 4);
        assert_eq!(cfg.train, TrainConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("epoch = 3\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[train]\nlearning_rate = 0.1\n").is_err());
    }

    #[test]
    fn low_noise_changes_only_noise() {
        let cfg = ExperimentConfig::desk();
        let ln = cfg.low_noise();
        assert_eq!(ln.network.noise_dbm, -110.0);
        let mut restored = ln.clone();
        restored.network.noise_dbm = cfg.network.noise_dbm;
        assert_eq!(restored, cfg);
    }

    #[test]
    fn schedule_follows_scheme() {
        let cfg = ExperimentConfig::desk();
        assert_eq!(cfg.averaging_schedule().len(), 8);
        assert!(cfg.with_scheme(Scheme::Marl).averaging_schedule().is_empty());
        assert_eq!("frl_suc".parse::<Scheme>().unwrap(), Scheme::FrlSuc);
    }
}
