use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid kernel/adversary combination: {0}")]
    InvalidCombination(String),

    #[error("kernel {0} has no explicit finite feature map")]
    UnsupportedFeatureMap(String),

    #[error("linear minimization oracle unsupported: {0}")]
    UnsupportedOracle(String),

    #[error("features are rank deficient: rank {rank} < dimension {dim}")]
    RankDeficient { rank: usize, dim: usize },

    #[error("ill-conditioned covariance: min eigenvalue {min_eig:e} below floor {floor:e}")]
    IllConditioned { min_eig: f64, floor: f64 },

    #[error("horizon too short: mixing coefficient gamma = {gamma} exceeds 1, increase n")]
    HorizonTooShort { gamma: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("tolerance not met: achieved gap {gap:e} > tol {tol:e} after {iterations} iterations")]
    ToleranceNotMet { gap: f64, tol: f64, iterations: usize },

    #[error("degenerate start: {0}")]
    DegenerateStart(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Precondition,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Input(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidCombination(_)
            | Error::UnsupportedFeatureMap(_)
            | Error::UnsupportedOracle(_)
            | Error::Parse(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorClass::Input,
            Error::HorizonTooShort { .. } | Error::Precondition(_) => ErrorClass::Precondition,
            Error::RankDeficient { .. }
            | Error::IllConditioned { .. }
            | Error::ToleranceNotMet { .. }
            | Error::DegenerateStart(_) => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
