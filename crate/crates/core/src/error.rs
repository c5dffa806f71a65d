//! Shared error type for the workbench core.
//!
//! Two failure families matter to callers:
//!
//! - [`Error::Domain`] — a parameter or argument lies outside its documented
//!   domain (negative length, flux outside bounds, μ ≤ ν, …). These are
//!   caller mistakes and map to configuration/precondition failures at the
//!   command-line level.
//! - [`Error::Format`] / [`Error::Io`] — structured input data (tag files,
//!   trace CSVs) is malformed or unreadable. These map to input-data
//!   failures at the command-line level.

use thiserror::Error;

/// Unified error type for all core operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Structured input data failed to parse or violates its format.
    #[error("format error: {0}")]
    Format(String),
    /// An underlying I/O operation failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Builds a [`Error::Domain`] from anything string-like.
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Builds a [`Error::Format`] from anything string-like.
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
