use thiserror::Error;

/// Errors produced by the matrix primitives, objective, solvers and harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KarcherError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error(
        "matrix is not positive definite: eigenvalue {eigenvalue:.17e} (largest {largest:.17e})"
    )]
    NotPositiveDefinite { eigenvalue: f64, largest: f64 },

    #[error("matrix has a non-finite entry")]
    NonFinite,

    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ensemble must contain at least one matrix")]
    EmptyEnsemble,

    #[error("matrices do not commute (relative commutator {0:.3e})")]
    NotCommuting(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = KarcherError> = std::result::Result<T, E>;
