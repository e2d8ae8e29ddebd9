//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model fitting, testing, scanning, and file handling.
#[derive(Debug, Error)]
pub enum Error {
    /// An observation or parameter is outside the domain of the family
    /// (negative count, non-integer count, non-finite input, ...).
    #[error("domain: {0}")]
    Domain(String),

    /// Estimation is impossible on the given data (zero total weight,
    /// too few observations, unidentified mean, ...).
    #[error("estimation: {0}")]
    Estimation(String),

    /// An unpenalized Gaussian fit collapsed to zero variance.
    #[error("degenerate-variance: {0}")]
    DegenerateVariance(String),

    /// Invalid user-supplied input (shape mismatch, invariant violation,
    /// malformed file, ...).
    #[error("input: {0}")]
    Input(String),

    /// A numerical failure during iteration, reported with context.
    #[error("numerical: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// A file could not be parsed; carries file and line context.
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-parsable class name, used by the CLI error protocol.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Estimation(_) => "estimation",
            Error::DegenerateVariance(_) => "degenerate-variance",
            Error::Input(_) => "input",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }
}
