use thiserror::Error;

/// Errors raised by the estimation library and the experiment harness.
#[derive(Debug, Error)]
pub enum DoaError {
    /// An angle lies outside the open interval (-90°, 90°).
    #[error("angle {0} rad is outside the open interval (-pi/2, pi/2)")]
    AngleDomain(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// The Fisher information matrix could not be inverted (coinciding sources).
    #[error("singular Fisher information: {0}")]
    SingularFisher(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed result table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DoaError>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> DoaError {
    DoaError::InvalidArgument(msg.into())
}
