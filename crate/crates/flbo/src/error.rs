//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
///
/// Variants are grouped by what the caller can do about them: malformed or
/// inconsistent inputs, metric-validity violations, mesh construction
/// problems, configuration mistakes, numerical-solver failures, and I/O.
#[derive(Debug, Error)]
pub enum FlboError {
    /// Input values are structurally unusable (non-finite entries, length
    /// mismatches, out-of-range indices).
    #[error("malformed input: {0}")]
    MalformedInput(String),

    /// A metric failed its validity requirements (not SPD, or drift too
    /// large).
    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    /// A mesh could not be loaded or violates mesh invariants; the message
    /// names the offending element.
    #[error("mesh error: {0}")]
    Mesh(String),

    /// A configuration value is outside its documented range.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative or direct solver failed; the message carries the
    /// residual or conditioning report.
    #[error("solver error: {0}")]
    Solver(String),

    /// Underlying file-system failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file parsed but its contents do not form a valid artifact.
    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, FlboError>;

/// Reads a file into a string, attaching the path to the error message while
/// preserving the [`std::io::ErrorKind`] (callers distinguish missing files
/// from other failures).
pub fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        FlboError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}
