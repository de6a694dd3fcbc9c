//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A noisy-teacher spec violates the noise-model invariants
    /// (e.g. the ground-truth class is outside the top-k mask).
    #[error("invalid teacher spec: {0}")]
    InvalidSpec(String),

    /// A config file or CLI override could not be parsed or validated.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Training produced a non-finite loss.
    #[error("training aborted: {0}")]
    Diverged(String),

    /// A label stream ended before the requested number of steps.
    #[error("label stream exhausted after {supplied} of {required} items")]
    StreamExhausted { supplied: usize, required: usize },

    /// A results file was written by an incompatible schema version.
    #[error("results schema version mismatch: file has {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },

    /// A study-level failure (e.g. too few uncensored points to fit).
    #[error("{0}")]
    Runtime(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {context}: {message}")]
    Parse { context: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_argument(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn io_error(context: impl Into<String>, source: std::io::Error) -> Error {
    Error::Io {
        context: context.into(),
        source,
    }
}

pub(crate) fn parse_error(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        context: context.into(),
        message: message.into(),
    }
}
