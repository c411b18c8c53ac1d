use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical precondition was violated (zero column, support mismatch, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes of two inputs do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A scenario or matrix file failed validation. `field` names the offending entry.
    #[error("invalid {field}: {message}")]
    Schema { field: String, message: String },

    /// Exhaustive enumeration would exceed its guard.
    #[error("enumeration too large: {0}")]
    Enumeration(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
