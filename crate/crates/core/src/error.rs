// SPDX-License-Identifier: MIT OR Apache-2.0

//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants are grouped by the
//! failure class they report; [`Error::exit_code`] maps them onto the CLI's
//! exit-code contract.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A file did not follow its expected format.
    #[error("parse error in {what} at line {line}: {message}")]
    Parse {
        /// File or stream being parsed.
        what: String,
        /// 1-based line (or row) number; 0 when not line-oriented.
        line: usize,
        /// Description of the problem.
        message: String,
    },

    /// Input parsed but violates a structural invariant (sizes, missing
    /// tensors, duplicate ids, hash mismatch).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A tensor had the wrong shape.
    #[error("shape error: tensor `{name}` has shape {actual:?}, expected {expected:?}")]
    Shape {
        /// Tensor name.
        name: String,
        /// Shape found in the checkpoint.
        actual: Vec<usize>,
        /// Shape required by the model configuration.
        expected: Vec<usize>,
    },

    /// An index was outside its valid range.
    #[error("range error: {0}")]
    Range(String),

    /// A function argument violated its precondition.
    #[error("argument error: {0}")]
    Argument(String),

    /// Two edits target overlapping sites that cannot be composed.
    #[error("conflicting edits: {0}")]
    Conflict(String),

    /// An activation cache did not hold a requested site.
    #[error("cache miss: {0}")]
    CacheMiss(String),

    /// Not enough material to satisfy a sampling request.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// An external sentence pair could not be aligned into prefix/target form.
    #[error("alignment failure: {0}")]
    Alignment(String),

    /// An input collection was empty where data was required.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A required group (template, form, head) had no data.
    #[error("completeness error: {0}")]
    Completeness(String),

    /// A pipeline stage was invoked before the stage it depends on.
    #[error("dependency error: {0}")]
    Dependency(String),

    /// Filesystem failure, annotated with the path involved.
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        /// Path being read or written.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },

    /// CSV (de)serialization failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            what: what.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for this error: 2 for usage-class problems, 3 for
    /// I/O and integrity problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Argument(_) | Self::Dependency(_) | Self::Range(_) => 2,
            _ => 3,
        }
    }
}
