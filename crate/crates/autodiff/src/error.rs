use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    /// Operand shapes are incompatible with the requested operation.
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },
    /// The call itself is malformed (e.g. backward from a non-scalar).
    #[error("usage error: {0}")]
    Usage(String),
}

impl TensorError {
    pub fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        TensorError::Dimension { op, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, TensorError>;
