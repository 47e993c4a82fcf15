//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed edge-list record; `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("input contains no edge records")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank {k} exceeds matrix dimension {n}")]
    RankTooLarge { k: usize, n: usize },

    #[error("non-finite value produced at iteration {iteration}")]
    NonFinite { iteration: usize },

    /// Power iteration ran out of iterations; carries the last iterate.
    #[error("power iteration on {operator} did not converge within {iterations} iterations")]
    PowerIteration {
        operator: &'static str,
        iterations: usize,
        last_iterate: Vec<f64>,
    },

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("training block is empty")]
    EmptyTrainingBlock,

    #[error("malformed factor file: {0}")]
    MalformedFactorFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
