//! Single-cell uplink OFDMA environment shared by all UE agents.
//!
//! Two timescales: fast fading is redrawn after every [`Environment::step`],
//! UE positions, pathloss and shadowing change in [`Environment::advance_epoch`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FrlError, Result};
use crate::radio::{self, ChannelState, LinkGeometry, SubChannel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub num_ues: usize,
    pub sub_channels: Vec<SubChannel>,
    /// Strictly increasing; the last entry is the transmit power cap.
    pub power_levels_dbm: Vec<f64>,
    pub noise_dbm: f64,
    /// Linear SNR a link must exceed for the global reward to be paid.
    pub gamma_min: f64,
    pub area_m: f64,
    pub speed_max: f64,
    pub epoch_duration_s: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub shadowing_sigma_db: f64,
    /// Multiplies the summed energy efficiency (bits/J) into the reward.
    pub reward_scale: f64,
    pub steps_per_epoch: usize,
    /// Observed gains are reported as `(gain_db + gain_db_offset) / gain_db_scale`.
    pub gain_db_offset: f64,
    pub gain_db_scale: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_ues: 4,
            sub_channels: [15e3, 30e3, 60e3, 120e3]
                .iter()
                .enumerate()
                .map(|(n, &b)| SubChannel::new(n, 3.5, b, 12))
                .collect(),
            power_levels_dbm: (0..=8).map(|k| 3.0 * k as f64).collect(),
            noise_dbm: -100.0,
            gamma_min: 1.0,
            area_m: 100.0,
            speed_max: 5.0,
            epoch_duration_s: 0.1,
            bs_height_m: 25.0,
            ue_height_m: 1.5,
            shadowing_sigma_db: 8.0,
            reward_scale: 1e-9,
            steps_per_epoch: 100,
            gain_db_offset: 110.0,
            gain_db_scale: 20.0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FrlError::Config(msg));
        if self.num_ues == 0 {
            return bad("num_ues must be positive".into());
        }
        if self.sub_channels.is_empty() {
            return bad("at least one sub-channel is required".into());
        }
        if self.num_ues > self.sub_channels.len() {
            return bad(format!(
                "{} UEs cannot share {} orthogonal sub-channels without collisions",
                self.num_ues,
                self.sub_channels.len()
            ));
        }
        for (n, ch) in self.sub_channels.iter().enumerate() {
            if ch.index != n {
                return bad(format!("sub-channel at position {n} has index {}", ch.index));
            }
            if !(ch.carrier_freq_ghz > 0.0) || !(ch.subcarrier_spacing_hz > 0.0) || ch.subcarriers == 0 {
                return bad(format!("sub-channel {n} has a non-positive frequency, spacing or width"));
            }
        }
        if self.power_levels_dbm.is_empty() || self.power_levels_dbm.iter().any(|p| !p.is_finite()) {
            return bad("power levels must be a non-empty list of finite dBm values".into());
        }
        if self.power_levels_dbm.windows(2).any(|w| w[0] >= w[1]) {
            return bad("power levels must be strictly increasing".into());
        }
        if !self.noise_dbm.is_finite() || !(self.gamma_min >= 0.0) {
            return bad("noise_dbm must be finite and gamma_min non-negative".into());
        }
        if !(self.area_m > 0.0) || !(self.speed_max >= 0.0) || !(self.epoch_duration_s >= 0.0) {
            return bad("area must be positive, speed and epoch duration non-negative".into());
        }
        if !(self.bs_height_m >= 0.0) || !(self.ue_height_m >= 0.0) || self.bs_height_m == self.ue_height_m {
            return bad("BS and UE heights must differ so that the link distance is never zero".into());
        }
        if !(self.shadowing_sigma_db >= 0.0) || !(self.reward_scale > 0.0) {
            return bad("shadowing sigma must be non-negative and reward scale positive".into());
        }
        if self.steps_per_epoch == 0 || !(self.gain_db_scale > 0.0) {
            return bad("steps_per_epoch and gain_db_scale must be positive".into());
        }
        Ok(())
    }

    pub fn num_channels(&self) -> usize {
        self.sub_channels.len()
    }

    pub fn action_space(&self) -> ActionSpace {
        ActionSpace { num_channels: self.num_channels(), num_power_levels: self.power_levels_dbm.len() }
    }

    /// Per-agent observation length: one gain per sub-channel plus the two fingerprint entries.
    pub fn obs_dim(&self) -> usize {
        self.num_channels() + 2
    }

    pub fn power_levels_w(&self) -> Vec<f64> {
        self.power_levels_dbm.iter().map(|&p| radio::dbm_to_watts(p)).collect()
    }

    pub fn noise_w(&self) -> f64 {
        radio::dbm_to_watts(self.noise_dbm)
    }

    pub fn bs_position(&self) -> [f64; 3] {
        [self.area_m / 2.0, self.area_m / 2.0, self.bs_height_m]
    }

    pub fn normalize_gain(&self, gain: f64) -> f64 {
        let db = if gain > 0.0 { radio::linear_to_db(gain) } else { f64::NEG_INFINITY };
        ((db + self.gain_db_offset) / self.gain_db_scale).clamp(-OBS_BOUND, OBS_BOUND)
    }
}

pub const OBS_BOUND: f64 = 5.0;

/// Joint sub-channel and power choice, flattened as `channel * N_p + power_level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub channel: usize,
    pub power_level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub num_channels: usize,
    pub num_power_levels: usize,
}

impl ActionSpace {
    pub fn size(&self) -> usize {
        self.num_channels * self.num_power_levels
    }

    pub fn encode(&self, a: Action) -> usize {
        debug_assert!(a.channel < self.num_channels && a.power_level < self.num_power_levels);
        a.channel * self.num_power_levels + a.power_level
    }

    pub fn decode(&self, index: usize) -> Action {
        assert!(index < self.size(), "action index {index} out of range");
        Action { channel: index / self.num_power_levels, power_level: index % self.num_power_levels }
    }
}

/// Per-UE observation: normalized gains on every sub-channel, then the
/// training-progress fingerprint `(epoch fraction, epsilon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    /// `reward / reward_scale`: summed bits/J when the step is rewarded, else 0.
    pub system_ee: f64,
    pub next_observations: Vec<Observation>,
    /// UE held its chosen sub-channel alone.
    pub per_ue_success: Vec<bool>,
    /// Energy efficiency of each UE's link, zero on collision.
    pub per_ue_ee: Vec<f64>,
    pub per_ue_snr: Vec<f64>,
    /// Sub-channels chosen by more than one UE.
    pub collision_mask: Vec<bool>,
}

/// Lifetime per-UE counts of collision-free steps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SuccessTracker {
    success_counts: Vec<u64>,
    total_steps: u64,
}

impl SuccessTracker {
    pub fn new(num_ues: usize) -> Self {
        Self { success_counts: vec![0; num_ues], total_steps: 0 }
    }

    pub fn record(&mut self, success: &[bool]) {
        assert_eq!(success.len(), self.success_counts.len());
        for (c, &s) in self.success_counts.iter_mut().zip(success) {
            *c += u64::from(s);
        }
        self.total_steps += 1;
    }

    pub fn success_counts(&self) -> &[u64] {
        &self.success_counts
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    /// `success_count / total_steps` per UE, all zero before the first step.
    pub fn rates(&self) -> Vec<f64> {
        if self.total_steps == 0 {
            return vec![0.0; self.success_counts.len()];
        }
        self.success_counts.iter().map(|&c| c as f64 / self.total_steps as f64).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Environment {
    config: NetworkConfig,
    rng: ChaCha8Rng,
    positions: Vec<[f64; 2]>,
    /// `links[ue][channel]`
    links: Vec<Vec<ChannelState>>,
    tracker: SuccessTracker,
    power_w: Vec<f64>,
    noise_w: f64,
}

impl Environment {
    /// Builds an environment and performs the initial [`reset`](Self::reset).
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut env = Self {
            power_w: config.power_levels_w(),
            noise_w: config.noise_w(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            positions: Vec::new(),
            links: Vec::new(),
            tracker: SuccessTracker::new(config.num_ues),
            config,
        };
        env.reset(seed);
        Ok(env)
    }

    /// Places UEs uniformly in the square, samples all fading components and
    /// clears the success counters. Returns observations with fingerprint `(0, 1)`.
    pub fn reset(&mut self, seed: u64) -> Vec<Observation> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let area = self.config.area_m;
        self.positions = (0..self.config.num_ues)
            .map(|_| [self.rng.random_range(0.0..=area), self.rng.random_range(0.0..=area)])
            .collect();
        self.tracker = SuccessTracker::new(self.config.num_ues);
        self.links.clear();
        self.resample_large_scale();
        self.resample_fast_fading();
        self.observations(0.0, 1.0)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn links(&self) -> &[Vec<ChannelState>] {
        &self.links
    }

    /// Composed gains `h[ue][channel]` of the current step.
    pub fn gains(&self) -> Vec<Vec<f64>> {
        self.links.iter().map(|row| row.iter().map(|s| s.gain).collect()).collect()
    }

    pub fn tracker(&self) -> &SuccessTracker {
        &self.tracker
    }

    pub fn success_rates(&self) -> Vec<f64> {
        self.tracker.rates()
    }

    /// Moves UEs to `positions` and redraws large-scale fading for the new geometry.
    pub fn place_ues(&mut self, positions: &[[f64; 2]]) {
        assert_eq!(positions.len(), self.config.num_ues);
        self.positions = positions.to_vec();
        self.resample_large_scale();
    }

    /// Replaces the channel state of every link (scripted scenarios and tests).
    pub fn set_links(&mut self, links: Vec<Vec<ChannelState>>) {
        assert_eq!(links.len(), self.config.num_ues);
        assert!(links.iter().all(|r| r.len() == self.config.num_channels()));
        self.links = links;
    }

    pub fn observations(&self, epoch_frac: f64, epsilon: f64) -> Vec<Observation> {
        self.links
            .iter()
            .map(|row| {
                let mut v: Vec<f64> = row.iter().map(|s| self.config.normalize_gain(s.gain)).collect();
                v.push(epoch_frac);
                v.push(epsilon);
                Observation(v)
            })
            .collect()
    }

    /// Applies one action per UE, scores it, then redraws fast fading and
    /// returns the next observations carrying the supplied fingerprint.
    pub fn step(&mut self, actions: &[Action], epoch_frac: f64, epsilon: f64) -> StepOutcome {
        let cfg = &self.config;
        assert_eq!(actions.len(), cfg.num_ues, "exactly one action per UE is required");
        let mut occupancy = vec![0usize; cfg.num_channels()];
        for a in actions {
            assert!(a.channel < cfg.num_channels() && a.power_level < self.power_w.len(), "invalid action {a:?}");
            occupancy[a.channel] += 1;
        }

        let mut per_ue_success = Vec::with_capacity(actions.len());
        let mut per_ue_ee = Vec::with_capacity(actions.len());
        let mut per_ue_snr = Vec::with_capacity(actions.len());
        for (ue, a) in actions.iter().enumerate() {
            let exclusive = occupancy[a.channel] == 1;
            let p = self.power_w[a.power_level];
            let snr = radio::snr(self.links[ue][a.channel].gain, p, self.noise_w).expect("noise power validated");
            let bw = cfg.sub_channels[a.channel].bandwidth_hz();
            per_ue_ee.push(radio::ee_utility(bw, p, snr, exclusive).expect("power levels are positive"));
            per_ue_success.push(exclusive);
            per_ue_snr.push(snr);
        }
        let rewarded = per_ue_success.iter().all(|&s| s) && per_ue_snr.iter().all(|&g| g > cfg.gamma_min);
        let system_ee = if rewarded { per_ue_ee.iter().sum() } else { 0.0 };
        let reward = cfg.reward_scale * system_ee;

        self.tracker.record(&per_ue_success);
        self.resample_fast_fading();

        StepOutcome {
            reward,
            system_ee,
            next_observations: self.observations(epoch_frac, epsilon),
            per_ue_success,
            per_ue_ee,
            per_ue_snr,
            collision_mask: occupancy.iter().map(|&o| o > 1).collect(),
        }
    }

    /// Moves every UE for one epoch (random direction, speed uniform in
    /// `[0, speed_max]`, reflecting at the walls), then redraws pathloss and
    /// shadowing for the new geometry.
    pub fn advance_epoch(&mut self) {
        let area = self.config.area_m;
        let dt = self.config.epoch_duration_s;
        let vmax = self.config.speed_max;
        for pos in &mut self.positions {
            let speed = vmax * self.rng.random::<f64>();
            let heading = std::f64::consts::TAU * self.rng.random::<f64>();
            pos[0] = reflect(pos[0] + speed * dt * heading.cos(), area);
            pos[1] = reflect(pos[1] + speed * dt * heading.sin(), area);
        }
        self.resample_large_scale();
    }

    fn geometry(&self, ue: usize) -> LinkGeometry {
        let [x, y] = self.positions[ue];
        LinkGeometry { ue_position: [x, y, self.config.ue_height_m], bs_position: self.config.bs_position() }
    }

    fn resample_large_scale(&mut self) {
        let sigma = self.config.shadowing_sigma_db;
        let mut links = Vec::with_capacity(self.config.num_ues);
        for ue in 0..self.config.num_ues {
            let d = self.geometry(ue).d3d();
            let row = self
                .config
                .sub_channels
                .iter()
                .enumerate()
                .map(|(n, ch)| {
                    let pl = radio::pathloss_db(ch.carrier_freq_ghz, d).expect("validated geometry");
                    let psi = radio::sample_shadowing(&mut self.rng, sigma);
                    let fading = self.links.get(ue).map_or(1.0, |r: &Vec<ChannelState>| r[n].fast_fading);
                    ChannelState::new(pl, psi, fading)
                })
                .collect();
            links.push(row);
        }
        self.links = links;
    }

    fn resample_fast_fading(&mut self) {
        for row in &mut self.links {
            for s in row.iter_mut() {
                *s = s.with_fading(radio::sample_rayleigh_power(&mut self.rng));
            }
        }
    }
}

/// Folds a coordinate back into `[0, size]` by mirror reflection.
fn reflect(x: f64, size: f64) -> f64 {
    let y = x.rem_euclid(2.0 * size);
    if y > size {
        2.0 * size - y
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat_links(cfg: &NetworkConfig, gain: f64) -> Vec<Vec<ChannelState>> {
        // pathloss chosen so that the composed gain equals `gain`
        let pl = -radio::linear_to_db(gain);
        vec![vec![ChannelState::new(pl, 1.0, 1.0); cfg.num_channels()]; cfg.num_ues]
    }

    #[test]
    fn default_dimensions() {
        let cfg = NetworkConfig::default();
        assert_eq!(cfg.action_space().size(), 36);
        assert_eq!(cfg.obs_dim(), 6);
        assert_eq!(cfg.power_levels_dbm.len(), 9);
        assert_eq!(*cfg.power_levels_dbm.last().unwrap(), 24.0);
        let bws: Vec<f64> = cfg.sub_channels.iter().map(SubChannel::bandwidth_hz).collect();
        assert_eq!(bws, vec![180e3, 360e3, 720e3, 1.44e6]);
    }

    #[test]
    fn action_codec() {
        let space = NetworkConfig::default().action_space();
        for idx in 0..space.size() {
            assert_eq!(space.encode(space.decode(idx)), idx);
        }
        assert_eq!(space.decode(10), Action { channel: 1, power_level: 1 });
    }

    #[test]
    fn reset_is_deterministic_and_in_bounds() {
        let cfg = NetworkConfig::default();
        let mut a = Environment::new(cfg.clone(), 5).unwrap();
        let b = Environment::new(cfg, 5).unwrap();
        let obs = a.observations(0.0, 1.0);
        assert_eq!(obs, b.observations(0.0, 1.0));
        assert_eq!(obs.len(), 4);
        assert!(obs.iter().all(|o| o.len() == 6));
        assert!(obs.iter().flat_map(|o| o.as_slice()).all(|v| v.abs() <= OBS_BOUND));
        assert!(a.positions().iter().flatten().all(|&c| (0.0..=100.0).contains(&c)));
        assert_eq!(a.reset(5), obs);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = NetworkConfig { num_ues: 5, ..Default::default() };
        assert!(Environment::new(cfg.clone(), 0).is_err());
        cfg.num_ues = 4;
        cfg.power_levels_dbm = vec![0.0, 3.0, 3.0];
        assert!(cfg.validate().is_err());
        let cfg = NetworkConfig { ue_height_m: 25.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn collision_voids_reward() {
        let cfg = NetworkConfig::default();
        let mut env = Environment::new(cfg.clone(), 1).unwrap();
        env.set_links(flat_links(&cfg, 1e-9));
        let acts = [(0, 0), (0, 0), (1, 0), (2, 0)].map(|(channel, power_level)| Action { channel, power_level });
        let out = env.step(&acts, 0.0, 1.0);
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.per_ue_success, vec![false, false, true, true]);
        assert_eq!(out.collision_mask, vec![true, false, false, false]);
        assert_eq!(&out.per_ue_ee[..2], &[0.0, 0.0]);
    }

    #[test]
    fn distinct_channels_above_threshold_pay_sum_of_ee() {
        let cfg = NetworkConfig::default();
        let mut env = Environment::new(cfg.clone(), 1).unwrap();
        env.set_links(flat_links(&cfg, 1e-9));
        let acts: Vec<Action> = (0..4).map(|n| Action { channel: n, power_level: 2 }).collect();
        let out = env.step(&acts, 0.5, 0.2);
        let p = radio::dbm_to_watts(6.0);
        let expected: f64 = cfg
            .sub_channels
            .iter()
            .map(|ch| {
                let g = radio::snr(1e-9, p, 1e-13).unwrap();
                radio::ee_utility(ch.bandwidth_hz(), p, g, true).unwrap()
            })
            .sum();
        assert!(out.reward > 0.0);
        assert_relative_eq!(out.system_ee, expected, max_relative = 1e-9);
        assert_relative_eq!(out.reward, cfg.reward_scale * expected, max_relative = 1e-9);
        assert!(out.next_observations.iter().all(|o| o.0[4] == 0.5 && o.0[5] == 0.2));
    }

    #[test]
    fn weak_link_voids_reward_but_counts_as_success() {
        let cfg = NetworkConfig::default();
        let mut env = Environment::new(cfg.clone(), 2).unwrap();
        // far corner UE: shadowing-free pathloss at 100 m plus a deep fade
        let mut links = flat_links(&cfg, 1e-9);
        let weak_pl = radio::pathloss_db(3.5, 100.0).unwrap();
        links[3] = vec![ChannelState::new(weak_pl, 1.0, 1e-4); 4];
        env.set_links(links);
        let acts: Vec<Action> = (0..4).map(|n| Action { channel: n, power_level: 0 }).collect();
        let out = env.step(&acts, 0.0, 1.0);
        assert!(out.per_ue_snr[3] <= cfg.gamma_min);
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.per_ue_success, vec![true; 4]);
        assert_eq!(env.success_rates(), vec![1.0; 4]);
    }

    #[test]
    fn success_rate_counting() {
        let cfg = NetworkConfig::default();
        let mut env = Environment::new(cfg.clone(), 3).unwrap();
        assert_eq!(env.success_rates(), vec![0.0; 4]);
        for t in 0..10 {
            // UE0 collides with UE1 on 3 of 10 steps
            let ch1 = if t < 3 { 0 } else { 1 };
            let acts = [0, ch1, 2, 3].map(|channel| Action { channel, power_level: 0 });
            env.step(&acts, 0.0, 1.0);
        }
        assert_eq!(env.success_rates(), vec![0.7, 0.7, 1.0, 1.0]);
        assert_eq!(env.tracker().total_steps(), 10);
    }

    #[test]
    fn scripted_collisions_give_zero_rates() {
        let mut env = Environment::new(NetworkConfig::default(), 4).unwrap();
        for _ in 0..25 {
            let acts = [0, 0, 1, 2].map(|channel| Action { channel, power_level: 4 });
            env.step(&acts, 0.0, 1.0);
        }
        assert_eq!(env.success_rates(), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn immobile_ues_keep_pathloss() {
        let cfg = NetworkConfig { speed_max: 0.0, ..Default::default() };
        let mut env = Environment::new(cfg, 9).unwrap();
        let pos = env.positions().to_vec();
        let before: Vec<f64> = env.links().iter().flatten().map(|s| s.pathloss_db).collect();
        let shadow: Vec<f64> = env.links().iter().flatten().map(|s| s.shadowing).collect();
        env.advance_epoch();
        assert_eq!(env.positions(), pos.as_slice());
        let after: Vec<f64> = env.links().iter().flatten().map(|s| s.pathloss_db).collect();
        assert_eq!(before, after);
        let shadow_after: Vec<f64> = env.links().iter().flatten().map(|s| s.shadowing).collect();
        assert_ne!(shadow, shadow_after);
    }

    #[test]
    fn epoch_displacement_bounded() {
        let mut env = Environment::new(NetworkConfig::default(), 10).unwrap();
        for _ in 0..1000 {
            let before = env.positions().to_vec();
            env.advance_epoch();
            for (a, b) in before.iter().zip(env.positions()) {
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                assert!(d <= 0.5 + 1e-12, "moved {d} m");
            }
        }
    }

    #[test]
    fn positions_stay_inside_over_long_runs() {
        let mut env = Environment::new(NetworkConfig { speed_max: 50.0, ..Default::default() }, 11).unwrap();
        for _ in 0..1_000_000 {
            env.advance_epoch();
            assert!(env.positions().iter().flatten().all(|c| (0.0..=100.0).contains(c)));
        }
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let cfg = NetworkConfig::default();
        let mut a = Environment::new(cfg.clone(), 77).unwrap();
        let mut b = Environment::new(cfg, 77).unwrap();
        for t in 0..300 {
            let acts: Vec<Action> = (0..4).map(|u| Action { channel: (u + t) % 4, power_level: t % 9 }).collect();
            assert_eq!(a.step(&acts, 0.1, 0.9), b.step(&acts, 0.1, 0.9));
            if t % 100 == 99 {
                a.advance_epoch();
                b.advance_epoch();
            }
        }
    }

    proptest! {
        #[test]
        fn reflect_stays_in_range(x in -1e4f64..1e4) {
            let y = reflect(x, 100.0);
            prop_assert!((0.0..=100.0).contains(&y));
        }

        #[test]
        fn success_rate_is_empirical_mean(pattern in prop::collection::vec(0usize..4, 1..60)) {
            let mut env = Environment::new(NetworkConfig::default(), 0).unwrap();
            let mut indicators = vec![0u32; 4];
            for &c in &pattern {
                // UE0 picks channel c, others fixed on 1,2,3
                let acts = [c, 1, 2, 3].map(|channel| Action { channel, power_level: 0 });
                let out = env.step(&acts, 0.0, 1.0);
                for (k, s) in out.per_ue_success.iter().enumerate() {
                    indicators[k] += u32::from(*s);
                }
            }
            let rates = env.success_rates();
            for k in 0..4 {
                prop_assert_eq!(rates[k], indicators[k] as f64 / pattern.len() as f64);
            }
        }
    }
}
