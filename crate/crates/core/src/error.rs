use thiserror::Error;

use crate::wav::WavError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("degenerate scale {0}")]
    DegenerateScale(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("infeasible room: no valid scene after {attempts} attempts")]
    InfeasibleRoom { attempts: usize },
    #[error("source outside room at {0:?}")]
    SourceOutsideRoom([f64; 3]),
    #[error("zero-power source: {0}")]
    ZeroPower(&'static str),
    #[error("silent reference channel {0}")]
    SilentReference(usize),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
