use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum CgdError {
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("support mismatch at index {index}: p > 0 but q = 0")]
    SupportMismatch { index: usize },

    #[error("invalid simplex weights: {0}")]
    InvalidSimplex(String),

    #[error("group {group} has no examples")]
    EmptyGroup { group: usize },

    #[error("group {group} has negative loss {value}")]
    NegativeLoss { group: usize, value: f64 },

    #[error("minority ratio must be >= 1, got {0}")]
    InvalidRatio(f64),

    #[error("non-finite training state at epoch {epoch}")]
    NonFiniteState { epoch: usize },

    #[error("eta_alpha = {eta_alpha} exceeds 1/G^2 = {limit}; increase the horizon")]
    StepSizeTooLarge { eta_alpha: f64, limit: f64 },

    #[error("proof hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("solution {index} has L-inf norm below 1e-12")]
    DegenerateSolution { index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CgdError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CgdError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CgdError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CgdError>;
