use thiserror::Error;

/// Errors produced by the evaluation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("empty input to fit")]
    EmptyFit,

    #[error("non-finite target value {0}")]
    NonFiniteTarget(f64),

    #[error("states/targets length mismatch: {states} vs {targets}")]
    LengthMismatch { states: usize, targets: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inverted interval: lower {lower} > upper {upper}")]
    InvertedInterval { lower: f64, upper: f64 },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml parse error: {0}")]
    Toml(String),
}

pub type Result<T> = std::result::Result<T, Error>;
