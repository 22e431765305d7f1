use thiserror::Error;

/// Errors raised by the simulation and optimization routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("element index ({h}, {v}) outside the {n_h}x{n_v} surface")]
    IndexOutOfRange { h: i64, v: i64, n_h: usize, n_v: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate effective channel for user {0}")]
    DegenerateChannel(usize),

    #[error("noise subspace needs more antennas ({antennas}) than sources ({sources})")]
    TooManySources { antennas: usize, sources: usize },

    #[error("retraction hit a zero entry at element {0}")]
    PathologicalStep(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown phase designer `{0}`")]
    UnknownDesigner(String),
}

pub type Result<T> = std::result::Result<T, Error>;
