use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch at site {site}: {detail}")]
    DimensionMismatch { site: usize, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dense operations are limited to {max} qubits, got {requested}")]
    TooLarge { requested: usize, max: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("linear algebra backend: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
