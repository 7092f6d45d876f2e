//! Federated multi-agent deep Q-learning for energy-efficient uplink
//! resource allocation in a single OFDMA cell.
//!
//! Each UE runs a local DQN that picks a sub-channel and a transmit power.
//! All UEs share one global reward, and their local models can be fused
//! periodically by replay-size or success-rate weighted averaging. A
//! centralized Hungarian assignment serves as the per-realization upper bound.
//!
//! The learning stack is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below fix the precisions used in practice.

pub mod agent;
pub mod env;
pub mod error;
pub mod experiment;
pub mod fed;
pub mod nn;
pub mod oracle;
pub mod radio;
pub mod scalar;

pub use error::{FrlError, Result};
pub use scalar::Scalar;

/// Precision used for training and checkpoints.
pub type Real = f32;
/// Precision used for gradient checking and reference computations.
pub type Wide = f64;

pub type Mlp32 = nn::Mlp<f32>;
pub type Mlp64 = nn::Mlp<f64>;
pub type WeightVector32 = nn::WeightVector<f32>;
pub type WeightVector64 = nn::WeightVector<f64>;
pub type DqnAgent32 = agent::DqnAgent<f32>;
pub type DqnAgent64 = agent::DqnAgent<f64>;
pub type Transition32 = agent::Transition<f32>;
pub type AveragingEvent32 = fed::AveragingEvent<f32>;
