//! Error type shared across the crate, with a fixed exit-code mapping for
//! the CLI: 0 success, 1 I/O, 2 validation/schema, 3 numerical failure.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A record is structurally malformed (missing field, bad JSON, bad
    /// enum value). `line` is 1-based within the input file.
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    /// A rating value falls outside its scale's legal range.
    #[error("range error at line {line}: {message}")]
    Range { line: usize, message: String },

    /// Two records claim the same key with different content.
    #[error("conflict: {0}")]
    Conflict(String),

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Bad configuration value (file or flag).
    #[error("config error: {0}")]
    Config(String),

    /// Two collections that must be 1:1 aligned are not.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Training produced a non-finite loss.
    #[error("non-finite loss at step {step} (pairs: {pair_ids:?})")]
    NonFinite { step: usize, pair_ids: Vec<String> },
}

impl Error {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// CLI exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            Error::Schema { .. }
            | Error::Range { .. }
            | Error::Conflict(_)
            | Error::Contract(_)
            | Error::Config(_)
            | Error::Alignment(_) => 2,
            Error::NonFinite { .. } => 3,
        }
    }
}
