//! Crate-wide error type.

/// Convenience alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the toolkit.
///
/// The variants split along the CLI exit-code contract: validation and
/// parse problems exit with code 2, numerical failures with code 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid input, configuration, or argument.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical procedure failed to converge or produced non-finite
    /// results; the message carries residual diagnostics where available.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A file could not be parsed; locates the offending cell.
    #[error("parse error in {file} (row {row}, column {col}): {message}")]
    Parse {
        file: String,
        row: usize,
        col: usize,
        message: String,
    },

    /// An underlying I/O failure.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the CLI: 2 for validation/parse/io problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
