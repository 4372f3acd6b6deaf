use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpexError {
    /// A caller-supplied parameter violates its contract.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// Bytes or text that do not decode into the expected wire format.
    #[error("format error: {0}")]
    Format(String),
    /// A plan line that does not match the step grammar.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SpexError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        SpexError::Parameter(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        SpexError::Format(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SpexError>;
