use alloc::string::String;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not Hermitian (relative defect {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("not a density matrix: {0}")]
    NotAState(String),
    #[error("non-finite entry")]
    NonFinite,
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("angle undefined for maximally mixed input")]
    UndefinedAngle,
    #[error("endpoint not on orbit (gap {0:e})")]
    EndpointMismatch(f64),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("resource cap exceeded: need {needed}, cap {cap}")]
    Resource { needed: usize, cap: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
