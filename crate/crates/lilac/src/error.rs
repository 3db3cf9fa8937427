//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the crate, grouped by contract kind.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer shapes do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A configuration value is invalid (even kernel, bad widths, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an operation's precondition.
    #[error("contract error: {0}")]
    Contract(String),

    /// A numeric argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Training diverged or produced non-finite values.
    #[error("training error: {0}")]
    Train(String),

    /// A checkpoint or data file is not in the expected format.
    #[error("format error: {0}")]
    Format(String),

    /// A checkpoint was written by an incompatible version.
    #[error("version error: expected {expected}, found {found}")]
    Version { expected: u32, found: u32 },

    /// A file is truncated or internally inconsistent.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for file-level problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Format(_) | Error::Version { .. } | Error::Integrity(_) => 2,
            _ => 1,
        }
    }
}
