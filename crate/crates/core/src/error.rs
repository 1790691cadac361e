use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// `index` is 1-based, matching the eigenfunction numbering.
    #[error("rank deficiency at vector {index}")]
    Rank { index: usize },

    #[error("solver did not converge after {iterations} iterations: {detail}")]
    Convergence { iterations: usize, detail: String },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("incompatible inputs: {0}")]
    Compat(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
