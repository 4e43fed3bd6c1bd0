use std::path::PathBuf;

use thiserror::Error;

/// Errors shared across the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("format version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("incompatible artifact: {0}")]
    IncompatibleArtifact(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("gradient oracle failure: {0}")]
    OracleFailure(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
