use thiserror::Error;

/// Errors raised by the estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpcaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular least-squares fit: {0}")]
    SingularFit(String),

    #[error("estimate is not available at t = {time} (kernel support vanishes there)")]
    NonEstimable { time: f64 },

    #[error("covariance surface has {cells} non-estimable cells")]
    NonEstimableSurface { cells: usize },

    #[error(
        "score system with {components} components is ill-conditioned (condition {condition:e}); \
         retry with {} components", components.saturating_sub(1)
    )]
    IllConditioned { components: usize, condition: f64 },

    #[error("no signal: all eigenvalues are zero")]
    NoSignal,
}

pub type Result<T> = std::result::Result<T, FpcaError>;

pub(crate) fn invalid_argument(msg: impl Into<String>) -> FpcaError {
    FpcaError::InvalidArgument(msg.into())
}

pub(crate) fn invalid_input(msg: impl Into<String>) -> FpcaError {
    FpcaError::InvalidInput(msg.into())
}
