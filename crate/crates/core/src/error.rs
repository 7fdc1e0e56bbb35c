use thiserror::Error;

/// Errors produced by the band-structure pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential document: {0}")]
    InvalidPotential(String),

    #[error("malformed potential document: {0}")]
    ParseDocument(#[from] toml::de::Error),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "eigenvalue solve did not converge: residual {residual:.3e} > tol {tol:.3e} \
         at truncation {truncation}"
    )]
    Unconverged {
        residual: f64,
        tol: f64,
        truncation: usize,
    },

    #[error("integration tolerance breached: defect {defect:.3e} > tol {tol:.3e} at {steps} steps")]
    IntegrationTolerance { defect: f64, tol: f64, steps: usize },

    #[error("no determinant minimum inside bracket [{lo:.6e}, {hi:.6e}]")]
    NoBracketMinimum { lo: f64, hi: f64 },

    #[error("insufficient band data: {0}")]
    InsufficientBands(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
