//! Crate-wide error type.

/// Errors surfaced by the simulation engines.
///
/// Variants are grouped by failure class so callers (notably the CLI) can
/// map them onto distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CvError {
    /// A requested dense object exceeds the configured dimension cap.
    #[error("dimension cap exceeded: requested {requested}, cap {cap}")]
    DimCap { requested: usize, cap: usize },

    /// A branch/term count exceeds the configured cap.
    #[error("branch cap exceeded: requested {requested}, cap {cap}")]
    BranchCap { requested: u128, cap: u128 },

    /// A certified error budget could not be met.
    #[error("certificate violation: {0}")]
    Certificate(String),

    /// A theorem precondition does not hold for the given parameters.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed input (parsing, shape mismatches, invalid parameters).
    #[error("invalid input: {0}")]
    Input(String),

    /// Numerical failure (non-convergence, singular matrix, ...).
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A parameter regime the engine deliberately does not support.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CvError>;
