use thiserror::Error;

/// Errors raised by geometry, Bregman, equilibrium and solver routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid tangent vector: {0}")]
    InvalidTangent(String),

    #[error("tangent vectors are based at different points")]
    BaseMismatch,

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("point outside the Bregman zone: {0}")]
    Zone(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("inner solver diverged: distance {distance} exceeds radius {radius}")]
    Divergence { distance: f64, radius: f64 },

    #[error("audit refused: {0}")]
    AuditRefused(String),
}

pub type Result<T> = std::result::Result<T, Error>;
