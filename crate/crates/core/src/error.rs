use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied a value outside of the accepted domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An operation was invoked in a state where its preconditions do not hold.
    #[error("contract violation: {0}")]
    ContractViolation(String),
    /// Checkpoint or config produced by an incompatible version or setup.
    #[error("incompatible: {0}")]
    Incompatible(String),
    /// Simulation or optimisation produced NaN/inf.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }
}
