//! Crate-wide error type.

/// Errors produced by transformations, solvers, and simulators.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// An argument violates a documented precondition (non-finite scores,
    /// out-of-range parameter, infeasible bounds, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimensions of two inputs do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A combinatorial enumeration or rejection loop exceeded its budget.
    #[error("capacity error: {0}")]
    Capacity(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}
