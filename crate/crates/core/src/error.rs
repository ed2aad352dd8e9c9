use thiserror::Error;

/// Errors shared across the simulation, estimation and training layers.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("qubit count mismatch: {0} vs {1}")]
    QubitMismatch(usize, usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("system size {n} exceeds cap of {cap} qubits")]
    SizeCap { n: usize, cap: usize },

    #[error("internal consistency violation: {0}")]
    Consistency(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid<S: Into<String>>(msg: S) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
