use thiserror::Error;

/// Errors raised across the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid risk specification: {0}")]
    InvalidRiskSpec(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("observation {obs} outside the support of {family}")]
    SupportViolation { family: &'static str, obs: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("empty support after truncation")]
    EmptySupport,

    #[error("successor state {value} is {distance} away from the state grid (spacing {spacing})")]
    Boundary {
        value: f64,
        distance: f64,
        spacing: f64,
    },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
