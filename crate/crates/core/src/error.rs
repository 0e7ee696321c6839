use std::path::PathBuf;

use thiserror::Error;

use crate::trainer::LossTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("training diverged: {consecutive} consecutive non-finite losses at iteration {iteration}")]
    Divergence {
        iteration: u64,
        consecutive: usize,
        trace: Box<LossTrace>,
    },

    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    CheckpointVersion { found: u16, expected: u16 },

    #[error("config fingerprint mismatch: checkpoint was written by a different training configuration")]
    FingerprintMismatch,

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
