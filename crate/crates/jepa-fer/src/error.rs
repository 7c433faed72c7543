//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// The variants follow the failure taxonomy used throughout the crate:
/// shape problems name both shapes, file-format problems carry a byte
/// offset, and every variant maps onto one of the process exit codes
/// (1 = configuration, 2 = data, 3 = numeric).
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes are incompatible for the requested operation.
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A configuration value is out of range or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A call violated a protocol contract (empty mask, empty fold, ...).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The API was used incorrectly (backward on a detached tensor, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// An index is out of range.
    #[error("index error: {0}")]
    Index(String),

    /// A container file is malformed; `offset` is the byte position.
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Training or evaluation produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) => 1,
            Error::Dimension { .. }
            | Error::Protocol(_)
            | Error::Index(_)
            | Error::Format { .. }
            | Error::Io { .. } => 2,
            Error::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
