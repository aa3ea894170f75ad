use thiserror::Error;

/// Errors produced by the solvers, encoders and file readers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vertex index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("edge ({u}, {v}) is a self loop")]
    SelfLoop { u: usize, v: usize },

    #[error("edge weight must be positive, got {0}")]
    NonPositiveWeight(f64),

    #[error("diagonal entry must be nonnegative, got {0}")]
    NegativeDiagonal(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("right-hand side is inconsistent with the null space (relative defect {0:.3e})")]
    InconsistentRhs(f64),

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point is not strictly feasible (group {group}, slack {slack:.3e})")]
    Infeasible { group: usize, slack: f64 },

    #[error("newton iteration failed: {0}")]
    NewtonFailure(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("image format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GlsError>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GlsError::DimensionMismatch { expected, got })
    }
}

pub(crate) fn check_finite(xs: &[f64], what: &'static str) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GlsError::NonFinite(what))
    }
}
