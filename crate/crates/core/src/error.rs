/// Crate-wide error type.
///
/// The CLI maps errors to exit codes: validation problems exit 1, I/O and
/// file-format problems exit 2 (see [`Error::exit_code`]).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Autodiff(#[from] pse_autodiff::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Autodiff(_) => 1,
            Error::Format(_) | Error::NotFound(_) | Error::Io(_) | Error::Json(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
