use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Dense routines refuse chains beyond their memory budget.
    #[error("system size {n_sites} exceeds the dense limit of {limit} sites")]
    Size { n_sites: usize, limit: usize },

    #[error("index error: {0}")]
    Index(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("no convergence after {steps} steps (residual {residual:.3e})")]
    Convergence { steps: usize, residual: f64 },

    #[error("discarded weight {total:.3e} exceeds the budget {cap:.3e} at t = {t}")]
    TruncationBudget { total: f64, cap: f64, t: f64 },

    #[error("correlators do not describe a valid state: {0}")]
    InvalidCorrelators(String),

    /// Imaginary residue or broken normalization in a measured quantity.
    #[error("corrupted state: {0}")]
    CorruptedState(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
