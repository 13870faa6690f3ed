//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants distinguish the three outcomes callers branch on: malformed or
/// inconsistent input, a requested computation that exceeds a declared
/// resource cap, and configurations outside an operation's supported domain.
#[derive(Debug, Error)]
pub enum Error {
    /// A model, rate function, time change, vector or mixture failed
    /// validation, or arguments are mutually inconsistent.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Endpoints admit no nonnegative integer jump-count representation
    /// (within the searched bound), or the representable mass lies below the
    /// truncation tolerance. The message names the residual displacement.
    #[error("infeasible endpoints: {0}")]
    Infeasible(String),

    /// A hard cap (enumeration volume, node budget) was exceeded. The message
    /// names the cap and how to proceed.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// The operation is defined only on a restricted input class (for
    /// example, homogeneous rates) and the input is outside it.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// JSON that does not parse or does not match the expected schema.
    #[error("json error at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
