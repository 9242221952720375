use thiserror::Error;

/// Errors raised by the recovery library.
#[derive(Debug, Error)]
pub enum LsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("incoherence {mu} is outside the closed regime (requires mu < {mu_max})")]
    OutOfRegime { mu: f64, mu_max: f64 },

    #[error("degenerate step size: projected residual has norm {projected_norm:e} but its image vanishes")]
    DegenerateStep { projected_norm: f64 },

    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LsError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LsError::InvalidInput(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        LsError::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LsError>;
