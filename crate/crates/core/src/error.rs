use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("range error: {0}")]
    Range(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("integration diverged at k = {k}")]
    Divergence { k: f64 },

    #[error("limit did not converge: {0}")]
    NonConvergence(String),

    #[error("possible singular spectral part: min |Pi| = {min_modulus:e} is below threshold {threshold:e}")]
    PossibleSingularPart { min_modulus: f64, threshold: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
