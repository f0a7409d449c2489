use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("Lyapunov equation has no unique positive definite solution: {0}")]
    NoUniqueSolution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid estimator gains: {0}")]
    InvalidGain(String),

    #[error("equilibrium is singular: g3 must be nonzero")]
    SingularEquilibrium,

    #[error("time {t} s is outside the profile horizon [0, {horizon}] s")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("numeric failure at t = {t} s: {what}")]
    NumericFailure { t: f64, what: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
