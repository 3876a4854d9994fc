use thiserror::Error;

/// Errors raised by the equilibrium engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PceError {
    #[error("argument {value} is outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("bracket expansion failed after {doublings} doublings while solving {what}")]
    BracketFailure {
        what: &'static str,
        doublings: usize,
    },

    #[error("no sign change of the budget function for |kappa| <= {limit:e} at h = {h}")]
    EconomyInfeasible { h: f64, limit: f64 },

    #[error("integrand overflow: {0}")]
    Overflow(String),

    #[error("unreliable Monte-Carlo estimate: effective sample size {ess:.1} < {min}")]
    UnreliableEstimate { ess: f64, min: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, PceError>;

impl From<std::io::Error> for PceError {
    fn from(e: std::io::Error) -> Self {
        PceError::Io(e.to_string())
    }
}
