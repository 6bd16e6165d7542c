/// Errors raised while building or differentiating a computation graph.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
