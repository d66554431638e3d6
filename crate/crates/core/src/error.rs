use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the generators, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sparsity: k = {k} exceeds dimension n = {n}")]
    InvalidSparsity { k: usize, n: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("instance too large: {supports} supports exceed the enumeration cap of {cap}")]
    InstanceTooLarge { supports: u128, cap: u128 },

    #[error("degenerate sample: zero sensing row with zero error")]
    DegenerateSample,

    #[error("divergence at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("rank-deficient support at selection {iteration}")]
    RankDeficient { iteration: usize },

    #[error("singular parameters: {0}")]
    SingularParameters(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("file error for {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
