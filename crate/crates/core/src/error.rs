use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spike train: {0}")]
    InvalidTrain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("constraints unsatisfiable after {attempts} attempts: {what}")]
    Unsatisfiable { attempts: usize, what: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
