use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid composition: {0}")]
    InvalidComposition(String),
    #[error("model breakdown: {0}")]
    ModelBreakdown(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
