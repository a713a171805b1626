use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective returned a non-finite value at particle {index}")]
    NonFiniteObjective { index: usize },

    #[error("matrix is not positive semi-definite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("growth certificate is unverified; refusing to evaluate moment bounds")]
    UnverifiedCertificate,

    #[error("ensemble blew up at step {step}: particle norm {norm:e} exceeds the divergence guard")]
    BlowUp { step: usize, norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
