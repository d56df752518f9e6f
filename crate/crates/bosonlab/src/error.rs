use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("term degree {degree} exceeds model degree k={k}")]
    DegreeViolation { degree: usize, k: usize },
    #[error("occupation {n} beyond cutoff {cutoff}")]
    BeyondCutoff { n: usize, cutoff: usize },
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NonHermitian(f64),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("degenerate ground state")]
    Degenerate,
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
