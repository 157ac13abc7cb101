//! Error type shared across the library.

use thiserror::Error;

/// Errors surfaced by library operations.
///
/// Contract violations (mismatched widths, invalid parameters) are reported
/// as errors rather than panics so that the CLI can map them to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector length, register width, or mode index did not match the
    /// declared dimension.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A parameter was outside its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An enumeration (Fock sector, ensemble, subset family) would exceed
    /// the configured cap.
    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),

    /// A text record could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure while reading or writing records.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
