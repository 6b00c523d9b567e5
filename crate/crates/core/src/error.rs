use thiserror::Error;

/// Errors produced by the discretization, problem setup and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A reaction evaluation produced NaN or infinity.
    #[error("non-finite reaction value on element {element}")]
    Evaluation { element: usize },

    /// The fibering derivative did not change sign inside the admissible bracket.
    #[error("Nehari projection failed: {0}")]
    ProjectionFailure(String),

    /// A signed part of a nodal iterate fell below the mass floor.
    #[error("degenerate iterate: {0}")]
    DegenerateIterate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
