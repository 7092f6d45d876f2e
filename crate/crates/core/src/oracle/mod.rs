//! Centralized references: per-link best power, optimal channel assignment
//! and uplink communication-cost accounting.

mod lsap;

pub use lsap::{max_weight_assignment, max_weight_assignment_lex};

use serde::{Deserialize, Serialize};

use crate::env::{Action, NetworkConfig};
use crate::error::{FrlError, Result};
use crate::radio;

/// Utilities are floored to multiples of `1 / UTILITY_SCALE` bits/J before
/// assignment so that optimality and ties are decided exactly.
pub const UTILITY_SCALE: f64 = 1e3;

/// Largest instance [`assign_brute_force`] will enumerate.
pub const BRUTE_FORCE_MAX_ROWS: usize = 8;

/// Best energy efficiency of every (UE, sub-channel) cell over the power grid,
/// subject to the SNR floor.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    pub u_star: Vec<Vec<f64>>,
    /// `None` where no power level clears the SNR floor.
    pub best_power_idx: Vec<Vec<Option<usize>>>,
    pub feasible: Vec<Vec<bool>>,
}

pub fn build_utility_matrix(gains: &[Vec<f64>], config: &NetworkConfig) -> UtilityMatrix {
    let powers = config.power_levels_w();
    let noise = config.noise_w();
    let mut out = UtilityMatrix { u_star: Vec::new(), best_power_idx: Vec::new(), feasible: Vec::new() };
    for row in gains {
        assert_eq!(row.len(), config.num_channels(), "one gain per sub-channel");
        let mut u_row = Vec::with_capacity(row.len());
        let mut idx_row = Vec::with_capacity(row.len());
        for (n, &g) in row.iter().enumerate() {
            let bw = config.sub_channels[n].bandwidth_hz();
            let mut best: Option<(usize, f64)> = None;
            for (k, &p) in powers.iter().enumerate() {
                let snr = radio::snr(g, p, noise).expect("positive noise");
                if snr <= config.gamma_min {
                    continue;
                }
                let ee = radio::ee_utility(bw, p, snr, true).expect("positive power");
                if best.is_none_or(|(_, b)| ee > b) {
                    best = Some((k, ee));
                }
            }
            u_row.push(best.map_or(0.0, |(_, ee)| ee));
            idx_row.push(best.map(|(k, _)| k));
        }
        out.feasible.push(idx_row.iter().map(Option::is_some).collect());
        out.u_star.push(u_row);
        out.best_power_idx.push(idx_row);
    }
    out
}

impl UtilityMatrix {
    /// Actions realizing an assignment at each cell's best power (lowest
    /// power level for infeasible cells).
    pub fn actions_for(&self, assignment: &Assignment) -> Vec<Action> {
        assignment
            .channels
            .iter()
            .enumerate()
            .map(|(ue, &n)| Action { channel: n, power_level: self.best_power_idx[ue][n].unwrap_or(0) })
            .collect()
    }
}

/// One-to-one UE to sub-channel map and its utility.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub channels: Vec<usize>,
    /// Sum of raw utilities over the assignment, accumulated in UE order.
    pub total: f64,
    /// Sum of the floored integer utilities the optimization used.
    pub scaled_total: i128,
}

pub fn scale_utilities(u: &[Vec<f64>]) -> Vec<Vec<i128>> {
    u.iter().map(|r| r.iter().map(|&x| (x * UTILITY_SCALE).floor() as i128).collect()).collect()
}

fn finish(u: &[Vec<f64>], scaled: &[Vec<i128>], channels: Vec<usize>) -> Assignment {
    let total = channels.iter().enumerate().map(|(i, &n)| u[i][n]).sum();
    let scaled_total = channels.iter().enumerate().map(|(i, &n)| scaled[i][n]).sum();
    Assignment { channels, total, scaled_total }
}

fn check_matrix(u: &[Vec<f64>]) {
    if let Some(first) = u.first() {
        assert!(u.iter().all(|r| r.len() == first.len()), "ragged utility matrix");
        assert!(u.len() <= first.len(), "more UEs than sub-channels");
        assert!(u.iter().flatten().all(|x| x.is_finite() && *x >= 0.0), "utilities must be finite and non-negative");
    }
}

/// Optimal assignment by the Hungarian method; among optima the
/// lexicographically smallest channel vector is returned.
pub fn assign_hungarian(u_star: &[Vec<f64>]) -> Assignment {
    check_matrix(u_star);
    let scaled = scale_utilities(u_star);
    let channels = max_weight_assignment_lex(&scaled).unwrap_or_else(|| max_weight_assignment(&scaled));
    finish(u_star, &scaled, channels)
}

/// Exhaustive search over injective maps, visited in lexicographic order so
/// the first optimum found is the lexicographically smallest.
pub fn assign_brute_force(u_star: &[Vec<f64>]) -> Result<Assignment> {
    check_matrix(u_star);
    if u_star.len() > BRUTE_FORCE_MAX_ROWS {
        return Err(FrlError::InstanceTooLarge { rows: u_star.len(), limit: BRUTE_FORCE_MAX_ROWS });
    }
    let scaled = scale_utilities(u_star);
    let cols = u_star.first().map_or(0, Vec::len);
    let mut best: Option<(i128, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(u_star.len());
    let mut used = vec![false; cols];
    search(&scaled, 0, 0, &mut current, &mut used, &mut best);
    let channels = best.map(|(_, c)| c).unwrap_or_default();
    Ok(finish(u_star, &scaled, channels))
}

fn search(
    w: &[Vec<i128>],
    row: usize,
    acc: i128,
    current: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut Option<(i128, Vec<usize>)>,
) {
    if row == w.len() {
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            *best = Some((acc, current.clone()));
        }
        return;
    }
    for col in 0..used.len() {
        if used[col] {
            continue;
        }
        used[col] = true;
        current.push(col);
        search(w, row + 1, acc + w[row][col], current, used, best);
        current.pop();
        used[col] = false;
    }
}

/// Scalars uploaded when every UE ships its observation to the BS each step:
/// `K * T * sum_i |o_i|`.
pub fn comm_cost_crl(epochs: u64, steps_per_epoch: u64, obs_dims: &[u64]) -> u64 {
    epochs * steps_per_epoch * obs_dims.iter().sum::<u64>()
}

/// Scalars uploaded by federated averaging: `M * sum_i (|W_i| + 1)`, the
/// extra scalar being each UE's averaging coefficient.
pub fn comm_cost_frl(averaging_rounds: u64, model_sizes: &[u64]) -> u64 {
    averaging_rounds * model_sizes.iter().map(|w| w + 1).sum::<u64>()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommCostReport {
    pub epochs: u64,
    pub steps_per_epoch: u64,
    pub averaging_rounds: u64,
    pub obs_dims: Vec<u64>,
    pub model_sizes: Vec<u64>,
    pub c_crl: u64,
    pub c_frl: u64,
}

impl CommCostReport {
    pub fn new(epochs: u64, steps_per_epoch: u64, averaging_rounds: u64, obs_dims: Vec<u64>, model_sizes: Vec<u64>) -> Self {
        Self {
            c_crl: comm_cost_crl(epochs, steps_per_epoch, &obs_dims),
            c_frl: comm_cost_frl(averaging_rounds, &model_sizes),
            epochs,
            steps_per_epoch,
            averaging_rounds,
            obs_dims,
            model_sizes,
        }
    }
}
