use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected d = {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid mixture specification: {0}")]
    InvalidSpec(String),

    #[error("invalid permutation {0:?}: not a bijection of 1..K")]
    InvalidPermutation(Vec<usize>),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("draw {iter} has no log_posterior; recompute it from the data and priors first")]
    MissingLogPosterior { iter: u64 },

    #[error("draw {iter} has no allocation vector and no dataset was supplied to derive one")]
    MissingAllocation { iter: u64 },

    #[error("dataset has no true allocation; misclassification needs ground truth")]
    MissingTruth,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(
        "all component densities underflowed at this point; evaluate in log space instead"
    )]
    DensityUnderflow,

    #[error("K = {k} exceeds the exhaustive search limit of {limit}; {hint}")]
    TooManyComponents {
        k: usize,
        limit: usize,
        hint: &'static str,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown method '{name}'; available: {available}")]
    UnknownMethod { name: String, available: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::UnknownMethod { .. } => 2,
            Error::NonFinite(_)
            | Error::DensityUnderflow
            | Error::Numerical(_) => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
