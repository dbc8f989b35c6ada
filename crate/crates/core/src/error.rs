use std::io;

use crate::grid::Field;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent configuration (bad JSON, unknown keys,
    /// parameter constraints).
    #[error("configuration error: {0}")]
    Config(String),

    /// Arguments that violate an operation's preconditions.
    #[error("input error: {0}")]
    Input(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Conjugate gradients hit the iteration cap. Carries the best iterate.
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<Field>,
    },

    /// The measured quantity vanished where a positive denominator is needed.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Json(_) => "config",
            Error::Input(_) => "input",
            Error::Numeric(_) | Error::NonConvergence { .. } | Error::Degenerate(_) => "numeric",
            Error::Io(_) => "io",
        }
    }
}
