use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrlError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("all averaging coefficients are zero")]
    DegenerateWeights,

    #[error("assignment instance too large for exhaustive search ({rows} rows, limit {limit})")]
    InstanceTooLarge { rows: usize, limit: usize },

    #[error("malformed weight snapshot: {0}")]
    Snapshot(String),

    #[error("failed to load {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = FrlError> = std::result::Result<T, E>;
