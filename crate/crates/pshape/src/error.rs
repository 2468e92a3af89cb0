use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied data failed (bad shapes, NaNs,
    /// out-of-range parameters, mismatched grids, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed config or CSV input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
