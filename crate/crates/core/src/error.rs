use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument to {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: String },

    #[error("backward: {0}")]
    Backward(String),

    #[error("missing weight `{0}`")]
    MissingWeight(String),

    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),

    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),

    #[error("{what} at offset {offset}")]
    Format { what: String, offset: u64 },

    #[error("non-finite {loss} loss at step {step}")]
    NonFiniteLoss { step: u64, loss: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(op: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(Error::Shape { op, detail: detail.into() })
}

pub(crate) fn arg_err<T>(op: &'static str, detail: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument { op, detail: detail.into() })
}
