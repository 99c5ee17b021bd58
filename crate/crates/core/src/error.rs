use std::io;
use std::path::PathBuf;

use mlsm_autodiff::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),
    /// Two inputs that must agree in shape do not.
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("parse error in {context} at byte {offset}: {message}")]
    Parse { context: String, offset: usize, message: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    /// Training hit a non-finite loss or gradient.
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(context: impl Into<String>, offset: usize, message: impl Into<String>) -> Self {
        Error::Parse { context: context.into(), offset, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
