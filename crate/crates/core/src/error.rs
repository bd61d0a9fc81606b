//! Error type shared across the crate.

use thiserror::Error;

/// Errors reported by library operations, grouped by category so callers
/// (and the CLI) can map them to exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem: incompatible shapes, invalid model wiring.
    #[error("configuration error: {0}")]
    Config(String),

    /// API misuse: out-of-range argument, stale cache, violated precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input outside the operation's domain (all-zero vector, negative mass).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Non-finite values or a numerically impossible state.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A dataset protocol constraint cannot be satisfied.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
