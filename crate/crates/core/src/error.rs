use thiserror::Error;

/// Errors raised by the simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("mode sampling: {0}")]
    Sampling(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Fried parameter is infinite because there is no turbulence.
    #[error("infinite Fried parameter (cn2 = 0)")]
    InfiniteFriedParameter,

    #[error("beacon lost: received beacon carries no power")]
    BeaconLost,

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("ensemble too small: need at least {needed}, got {got}")]
    EnsembleTooSmall { needed: usize, got: usize },

    #[error("zero trace: projected state has no population")]
    ZeroTrace,

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("config: {0}")]
    Config(String),

    #[error("parse: {0}")]
    Parse(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
