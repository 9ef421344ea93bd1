use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("integrity error for vehicle {vehicle_id}: {msg}")]
    Integrity { vehicle_id: u64, msg: String },

    #[error("invalid metadata: {0}")]
    Metadata(String),

    #[error("IDM domain error: spacing {spacing} m does not exceed length {length} m")]
    BumperOverlap { spacing: f64, length: f64 },

    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),

    #[error("degenerate features: {0}")]
    DegenerateFeatures(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("feature arity mismatch: model expects {expected}, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input data rather than bad usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
