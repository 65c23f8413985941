use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid exponent p = {0}: must satisfy p >= 1")]
    InvalidExponent(f64),
    #[error("derivative order ({x_order}, {xi_order}) exceeds the declared maximum ({max_x}, {max_xi})")]
    OrderUnavailable {
        x_order: usize,
        xi_order: usize,
        max_x: usize,
        max_xi: usize,
    },
    #[error("translation {0:?} is not a lattice vector")]
    NotOnLattice(Vec<f64>),
    #[error("quadrature budget exceeded: {required} node evaluations requested, budget is {budget}")]
    BudgetExceeded { required: u64, budget: u64 },
    #[error("matrix of size {size} exceeds the dense SVD ceiling {ceiling}")]
    SizeCeiling { size: usize, ceiling: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),
    #[error("operator fails the trace-class surrogate test: tail fraction {tail:e} >= {threshold:e}")]
    NotTraceClass { tail: f64, threshold: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
