use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected} points per axis, got {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("geodesic possibly trapped: no exit after {steps} steps")]
    PossiblyTrapped { steps: usize },

    #[error("{0} is not a recorded conjugate time")]
    NotConjugateTime(f64),

    #[error("numerical failure at iteration {k}: {what}")]
    Diverged { k: usize, what: String },
}
