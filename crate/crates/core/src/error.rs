use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Two parts of one call contradicted each other (e.g. conflicting
    /// update coefficients for the same voxel in one batch).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A numerical routine could not produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed serialized data.
    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
