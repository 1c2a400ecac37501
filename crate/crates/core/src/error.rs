use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid symmetry class beta = {0} (expected 1 or 2)")]
    InvalidBeta(u8),
    #[error("invalid entry law: {0}")]
    InvalidLaw(String),
    #[error("invalid deformation: {0}")]
    InvalidDeformation(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("matrix is not self-adjoint (asymmetry {asymmetry:e})")]
    NotSelfAdjoint { asymmetry: f64 },
    #[error("spectrum is not sorted ascending at position {0}")]
    Unsorted(usize),
    #[error("iterative eigensolver did not converge after {iterations} steps")]
    NoConvergence { iterations: usize },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("covariance is indefinite: min eigenvalue {min_eig:e} below tolerance {tolerance:e}")]
    Indefinite { min_eig: f64, tolerance: f64 },
    #[error("partition error: {0}")]
    Partition(String),
    #[error("empty sample")]
    EmptySample,
    #[error("invalid configuration: {0}")]
    Config(String),
}
