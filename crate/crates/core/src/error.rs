//! Error type shared across the crate, with process exit-code mapping for the CLI.

use thiserror::Error;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (bad flag values, dimension
    /// mismatches requested by the caller, unknown variants).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or unusable input data (CSV parse failures, empty datasets,
    /// out-of-range node ids, snapshot files that fail validation).
    #[error("data error: {0}")]
    Data(String),

    /// Numeric divergence during training or evaluation (non-finite loss,
    /// gradients, or embeddings).
    #[error("numeric divergence: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to.
    ///
    /// 2 = configuration error, 3 = data error, 4 = numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) | Error::Json(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}
