use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The q-plate charge would move the photon outside the `m = ±1` subspace.
    #[error("unsupported q-plate charge q = {0} (only q = 1/2 is modeled)")]
    UnsupportedCharge(f64),

    /// The estimator was handed a count table with zero total counts.
    #[error("no data: count table total is zero")]
    NoData,

    /// A count or triad document did not match its schema.
    #[error("schema error at line {line}: {message}")]
    Schema { line: u64, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
