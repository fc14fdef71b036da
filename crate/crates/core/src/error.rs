use thiserror::Error;

/// Errors raised by constructors and checked operations across the lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("weight matrix invariant violated: {check}")]
    InvalidWeights { check: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("no connected geometric graph with density {density} on {n} nodes after {attempts} placements")]
    InfeasibleDensity { n: usize, density: f64, attempts: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("reference optimum did not converge within {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error in key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("csv schema violation: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> LabError {
    LabError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
