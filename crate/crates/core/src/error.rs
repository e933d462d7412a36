use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("unbounded conjugate: {0}")]
    UnboundedConjugate(String),
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outside validity range: {0}")]
    ValidityRange(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("state {0} has zero stationary mass")]
    DegenerateState(usize),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("internal cross-check failed: {0}")]
    CrossCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;
