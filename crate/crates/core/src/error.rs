use thiserror::Error;

/// Errors raised by the entanglement pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("susceptibility pole at Ω = {omega}")]
    Pole { omega: f64 },

    #[error("covariance integral did not converge: {0}")]
    NonConvergent(String),

    #[error("unphysical covariance matrix: {0}")]
    Unphysical(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("{count} partially transposed symplectic eigenvalues below threshold (at most one is possible)")]
    MultipleNegativeModes { count: usize },

    #[error("PPT and Schur-complement routes disagree: nu_min = {nu_min}, indicator = {indicator}")]
    RouteDisagreement { nu_min: f64, indicator: f64 },

    #[error("no transition in range [{lo}, {hi}]")]
    NoTransition { lo: f64, hi: f64 },

    #[error("{count} sign changes along the ray (expected exactly one); scan: {scan:?}")]
    MultipleTransitions { count: usize, scan: Vec<(f64, f64)> },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter(_) | Error::InvalidSpectrum(_) => 2,
            Error::NoTransition { .. } => 4,
            Error::Io(_) => 1,
            _ => 3,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
