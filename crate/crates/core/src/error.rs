//! Error taxonomy shared by every module.

use thiserror::Error;

/// Errors surfaced by simulator operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Input lies outside the mathematical domain of an operation.
    #[error("domain: {0}")]
    Domain(String),

    /// A caller broke an API contract (shape mismatch, unnormalized input, ...).
    #[error("contract: {0}")]
    Contract(String),

    /// Work refused up front because it would exceed a configured resource cap.
    #[error("refused: {0}")]
    Refused(String),

    /// A density kernel degenerated (vanishing trace).
    #[error("degenerate: {0}")]
    Degenerate(String),

    /// Configuration parsing or validation failure.
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable one-word category used for machine-parsable CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Contract(_) => "contract",
            Error::Refused(_) => "refused",
            Error::Degenerate(_) => "degenerate",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
