use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NldError {
    #[error("unknown kernel id `{0}`")]
    UnknownKernel(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("discrete kernel nontrivial: {0}")]
    KernelNontrivial(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("tail mass: {0}")]
    Tail(String),
}

pub type Result<T> = std::result::Result<T, NldError>;
