use thiserror::Error;

/// Errors produced anywhere in the simulator core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("selection rule violated: {0}")]
    SelectionRule(String),

    #[error("physics infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence after {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("integration failed: norm drift {achieved:.3e} exceeds {tolerance:.1e} after {halvings} step halvings")]
    Integration {
        achieved: f64,
        tolerance: f64,
        halvings: usize,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
