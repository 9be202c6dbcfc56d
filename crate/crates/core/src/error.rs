//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by geometry, risk, moment and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is rank deficient (singular value ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("logarithm undefined: largest principal angle {theta:.6} is at the cut locus")]
    CutLocus { theta: f64 },

    #[error("tangent vectors are anchored at different representatives")]
    AnchorMismatch,

    #[error("matrix is not an orthonormal complement of the anchor (residual {residual:.3e})")]
    NotOrthogonalComplement { residual: f64 },

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("no eigengap: lambda_k - lambda_(k+1) = {gap:.3e}")]
    NoEigengap { gap: f64 },

    #[error("subspace is not the global minimizer (gradient norm {gradient_norm:.3e})")]
    NotMinimizer { gradient_norm: f64 },

    #[error("largest principal angle {theta:.6} is not below pi/4")]
    AngleTooLarge { theta: f64 },

    #[error("argument outside the domain: {0}")]
    DomainError(String),

    #[error("invalid Schatten exponent p = {0}")]
    InvalidP(f64),

    #[error("data set is empty")]
    EmptyData,

    #[error("invalid spiked model: {0}")]
    InvalidSpike(String),

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("sample mean is not diagonal in the model eigenbasis (residual {residual:.3e})")]
    EigenbasisMismatch { residual: f64 },

    #[error("delta = {0} is outside the admissible range")]
    DeltaOutOfRange(f64),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("fixed-point iteration did not converge after {iterations} rounds")]
    NoConvergence { iterations: usize },

    #[error("insufficient data: need {needed}, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("moment tensor not available: {0}")]
    MissingTensor(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for errors caused by bad input rather than by numerical breakdown.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NoConvergence { .. }
                | Error::CutLocus { .. }
                | Error::RankDeficient { .. }
                | Error::DegenerateSpectrum(_)
                | Error::InsufficientData { .. }
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
