use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Structural mismatch between inputs (vector widths, column lengths).
    #[error("schema error: {0}")]
    Schema(String),

    /// A precondition on values was violated (empty dataset, bad parameter).
    #[error("domain error: {0}")]
    Domain(String),

    /// Rejection sampling ran out of attempts.
    #[error("exhausted after {attempts} attempts: {context}")]
    Exhausted { attempts: usize, context: String },

    /// Enumeration budget exceeded (unknown part too large).
    #[error("budget error: {0}")]
    Budget(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    /// A persisted artifact could not be decoded.
    #[error("format error: {0}")]
    Format(String),

    /// Config field failed validation.
    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("path error: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
