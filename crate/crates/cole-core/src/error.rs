use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An architecture string or derivation tree failed to parse.
    #[error("parse error: {0}")]
    Parse(String),

    /// Code emission could not complete (missing shape annotation etc.).
    #[error("transpile error: {0}")]
    Transpile(String),

    /// An embedding provider rejected its input or returned bad data.
    #[error("provider error: {0}")]
    Provider(String),

    /// A provider transport failure that survived all retries. Carries the
    /// batch indices that never produced a vector.
    #[error("provider transport failed for batch indices {indices:?}: {message}")]
    Transport {
        /// Positions in the input batch that failed.
        indices: Vec<usize>,
        /// Underlying failure description.
        message: String,
    },

    /// Inputs had incompatible dimensions or were out of range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A statistic or decomposition is undefined for the given data.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// Training diverged to a non-finite loss.
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss {
        /// Epoch index (0-based) where the loss stopped being finite.
        epoch: usize,
    },

    /// Benchmark table lookup or validation failure.
    #[error("benchmark error: {0}")]
    Benchmark(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// CSV (de)serialization failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
