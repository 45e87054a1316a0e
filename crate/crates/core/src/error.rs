use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} lies outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("no modes with frequency in [{min}, {max}]")]
    EmptyBasis { min: f64, max: f64 },

    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("norm drift {drift:e} exceeds tolerance at t = {time}")]
    NormDrift { time: f64, drift: f64 },

    #[error("no samples in window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("rejection sampling acceptance {acceptance:.4} too low for ensemble {ensemble}")]
    RejectionOverflow { ensemble: usize, acceptance: f64 },

    #[error("index set is empty")]
    EmptySet,

    #[error("atom {0} appears in both index sets")]
    Overlap(usize),

    #[error("truncated basis needs {states} states, cap is {cap}")]
    Capacity { states: usize, cap: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Stable machine-readable code used in error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::EmptyBasis { .. } => "empty_basis",
            Error::Quadrature { .. } => "quadrature_failure",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NormDrift { .. } => "norm_drift",
            Error::EmptyWindow { .. } => "empty_window",
            Error::RejectionOverflow { .. } => "rejection_overflow",
            Error::EmptySet => "empty_set",
            Error::Overlap(_) => "overlap",
            Error::Capacity { .. } => "capacity",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Io(_) => "io",
        }
    }

    /// Offending configuration key, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            Error::Validation { key, .. } => Some(key),
            _ => None,
        }
    }
}
