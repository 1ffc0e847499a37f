use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants are grouped so a front end can map them onto exit codes:
/// configuration problems, bad input data, and numerical non-convergence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid constellation geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("QR decomposition failed: {0}")]
    Decomposition(String),

    #[error("format error at line {line}: {msg}")]
    Format { line: u64, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("asymptotic bound undefined: {0}")]
    AsymptoteUndefined(String),

    #[error("insufficient points: {0}")]
    InsufficientPoints(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Convergence,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_)
            | Error::InvalidGeometry(_)
            | Error::Config(_)
            | Error::Range(_)
            | Error::InsufficientPoints(_)
            | Error::AsymptoteUndefined(_) => ErrorClass::Config,
            Error::Decomposition(_) | Error::Format { .. } | Error::Data(_) | Error::Degenerate(_) | Error::Io(_) => {
                ErrorClass::Data
            }
            Error::Convergence(_) => ErrorClass::Convergence,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
