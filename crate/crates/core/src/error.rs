use thiserror::Error;

/// Errors produced by the phase-space filtering toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid CCR structure: {0}")]
    InvalidCcr(String),

    #[error("invalid field structure: {0}")]
    InvalidField(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("matrix is not positive definite: {context} (smallest eigenvalue {min_eig:e})")]
    NotPositiveDefinite { context: String, min_eig: f64 },

    #[error("Hermitian pairing violated: {0}")]
    PairingViolation(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("measurement channel is rank deficient: F F^T must be positive definite (smallest eigenvalue {min_eig:e})")]
    ChannelRankDeficient { min_eig: f64 },

    #[error("measurement channel violates the isotropy condition F J F^T = 0 (max residual {residual:e})")]
    ChannelNotIsotropic { residual: f64 },

    #[error("isotropic completion of G failed after {attempts} attempts: {reason}")]
    CompletionFailed { attempts: usize, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point outside the evaluable domain")]
    OutsideDomain,

    #[error("time step {dt:e} exceeds the stability bound; use dt <= {suggested:e}")]
    StepTooLarge { dt: f64, suggested: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("instability detected: {0}")]
    Unstable(String),

    #[error("normalization drift {drift:e} exceeds {limit:e}")]
    NormalizationDrift { drift: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
