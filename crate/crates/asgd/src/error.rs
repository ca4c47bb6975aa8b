use std::io;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A sparse index points past the end of a dense vector.
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    /// A scalar that must be finite was NaN or infinite.
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },

    /// A documented precondition was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// `lambda * gamma >= 1`: the per-step regularization shrink factor
    /// would be zero or negative.
    #[error("regularization shrink nonpositive at step {step}: lambda*gamma = {product}")]
    ShrinkNonpositive { step: u64, product: f64 },

    /// The iterate stopped being finite.
    #[error("iterate diverged at step {step}")]
    Diverged { step: u64 },

    /// Malformed text input.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Well-formed input that cannot be used (empty stream, unmapped label,
    /// dimension mismatch, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Numeric failure outside the iterate path (singular system, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
