use std::fmt;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed bytes in an image, tensor or bundle file.
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },

    /// Malformed line in a plain-text configuration or net description.
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Incompatible dimensions between operands.
    #[error("shape error: {0}")]
    Shape(String),

    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(offset: usize, msg: impl fmt::Display) -> Self {
        Error::Format {
            offset,
            msg: msg.to_string(),
        }
    }

    pub(crate) fn shape(msg: impl fmt::Display) -> Self {
        Error::Shape(msg.to_string())
    }

    pub(crate) fn contract(msg: impl fmt::Display) -> Self {
        Error::Contract(msg.to_string())
    }

    /// True for errors caused by unreadable file contents.
    pub fn is_format(&self) -> bool {
        matches!(self, Error::Format { .. } | Error::Parse { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
