use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state not faithful: smallest eigenvalue {min_eigenvalue:e} is below {tol:e}")]
    StateNotFaithful { min_eigenvalue: f64, tol: f64 },

    #[error("matrix is not selfadjoint (residual {residual:e})")]
    NotSelfadjoint { residual: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-unique fixed point: fixed space dimension {0}")]
    NonUniqueFixedPoint(usize),

    #[error("no fixed point found for the invariant state problem")]
    NoFixedPoint,

    #[error("inconclusive irreducibility: {0}")]
    InconclusiveIrreducibility(String),

    #[error("channel is reducible")]
    Reducible,

    #[error("hypothesis fails: {0}")]
    HypothesisFailed(String),

    #[error("state is not invariant (residual {residual:e})")]
    NotInvariant { residual: f64 },

    #[error("right-hand side is not centered: tr(σF) = {0:e}")]
    NotCentered(f64),

    #[error("positive recurrence fails: no faithful invariant state")]
    PositiveRecurrenceFails,

    #[error("filter collapse: all outcome probabilities vanish")]
    FilterCollapse,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("grid rationalization failed: {0}; use the enumeration fallback")]
    Rationalization(String),

    #[error("request infeasible: {0}")]
    Infeasible(String),

    #[error("unravelling mismatch: {0}")]
    UnravellingMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
