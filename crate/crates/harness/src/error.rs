use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` out of range: {reason}")]
    OutOfRange { key: String, reason: String },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ris_occult::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Sampling(String),
}

impl HarnessError {
    /// Stable identifier for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(ConfigError::Io { .. }) => "config_io",
            Self::Config(ConfigError::Malformed(_)) => "malformed_config",
            Self::Config(ConfigError::UnknownKey(_)) => "unknown_key",
            Self::Config(ConfigError::OutOfRange { .. }) => "out_of_range",
            Self::Model(_) => "model",
            Self::Io(_) => "io",
            Self::Csv(_) => "csv",
            Self::Json(_) => "json",
            Self::Sampling(_) => "sampling",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
