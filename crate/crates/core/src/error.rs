use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scenario file: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate bounding box (zero area)")]
    DegenerateBox,

    #[error("calibration needs at least one observation with positive area and range")]
    EmptyCalibration,

    #[error("trace output failed: {0}")]
    Trace(#[from] std::io::Error),
}
