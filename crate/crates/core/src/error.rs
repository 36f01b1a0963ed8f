use num_complex::Complex64;
use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid orders: {0}")]
    InvalidOrders(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("evaluation at a pole z = {0}")]
    Pole(Complex64),

    #[error("order {alpha} at point {index} gives resonant Frobenius exponents")]
    ResonantExponents { index: usize, alpha: f64 },

    #[error("Frobenius series at point {index} did not converge at radius {radius}")]
    SeriesRadius { index: usize, radius: f64 },

    #[error("path error: {0}")]
    Path(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("solver converged to a branch that is not the hyperbolic metric")]
    WrongBranch,

    #[error("reducible representation: invariant form space has dimension {0}")]
    Reducible(usize),

    #[error("conjugation/branch error: {0}")]
    Branch(String),

    #[error("quadrature budget exhausted: {0}")]
    Budget(String),

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("extrapolation failed: {0}")]
    Extrapolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
