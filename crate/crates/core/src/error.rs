//! Crate-wide error type.
//!
//! Library functions return [`Result`]; the variants separate input problems
//! (bad files, bad arguments, malformed formulas) from runtime numeric
//! failures so callers can map them to distinct exit codes.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Csv { path: PathBuf, msg: String },

    /// Header-level problems: missing required columns, duplicate names.
    #[error("schema error: {0}")]
    Schema(String),

    /// Row-level data validation; messages cite 1-based data line numbers.
    #[error("data error: {0}")]
    Data(String),

    /// Formula syntax error. `line` is 1-based within the source file (0 for
    /// single-line input), `offset` is the 0-based byte offset in that line.
    #[error("parse error at line {line}, offset {offset}: {msg}")]
    Parse {
        line: usize,
        offset: usize,
        msg: String,
    },

    #[error("duplicate alpha name `{name}` at line {line}")]
    DuplicateAlpha { name: String, line: usize },

    /// A formula references columns the frame does not provide.
    #[error("alpha `{alpha}` references unknown identifiers: {}", idents.join(", "))]
    UnknownIdentifiers { alpha: String, idents: Vec<String> },

    /// Invalid argument or configuration value.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A value required by the trading loop is masked at a row inside the
    /// active window.
    #[error("missing value in column `{column}` at row {row}")]
    MissingValue { column: String, row: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// Training produced non-finite parameters; the step count is the number
    /// of environment steps collected when the abort triggered.
    #[error("training diverged after {steps} steps (non-finite parameters)")]
    Diverged { steps: u64 },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl Error {
    /// True for errors that indicate a runtime numeric failure rather than
    /// bad input.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. } | Error::NonFinite(_) | Error::MissingValue { .. }
        )
    }
}
