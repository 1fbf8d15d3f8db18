use thiserror::Error;

/// Errors raised by the simulator, the drivers and the file front ends.
#[derive(Debug, Error)]
pub enum Error {
    #[error("width mismatch: {0} vs {1} bits")]
    WidthMismatch(u32, u32),

    #[error("bit {bit} out of range for a {width}-bit register")]
    BitOutOfRange { bit: u32, width: u32 },

    #[error("invalid width {0} (must be 1..=64)")]
    InvalidWidth(u32),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid fault site: {0}")]
    FaultSite(String),

    #[error("value {value} does not fit in {width} bits")]
    Overflow { value: i64, width: u32 },

    #[error("weights not loaded")]
    NotLoaded,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
