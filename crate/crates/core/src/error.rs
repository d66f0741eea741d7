use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (supported: 1..={max})", max = crate::MAX_DIM)]
    UnsupportedDimension(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("value overflows f64 range: {0}")]
    Overflow(String),

    #[error("stability guard violated: dt = {dt} exceeds limit {limit}")]
    StabilityGuard { dt: f64, limit: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for numeric-guard failures (as opposed to malformed input).
    pub fn is_numeric_guard(&self) -> bool {
        matches!(self, Error::StabilityGuard { .. } | Error::Overflow(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
