use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero matrix has no range basis")]
    ZeroMatrix,

    #[error("rank-deficient pseudo-inverse request")]
    RankDeficientPseudoInverse,

    #[error("spark brute force exceeds size guard (n = {n}, guard = {guard})")]
    SparkSizeGuard { n: usize, guard: usize },

    #[error("support enumeration exceeds guard: C({n}, {k}) > {guard}")]
    EnumerationGuard { n: usize, k: usize, guard: u64 },

    #[error("rank exceeds sparsity (rank {rank} > k {k})")]
    RankExceedsSparsity { rank: usize, k: usize },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("invalid parameter: {context}")]
    InvalidParameter { context: String },

    #[error("degenerate random draw")]
    DegenerateRandomDraw,

    #[error("uniqueness regime: no counterexample exists")]
    UniquenessRegime,

    #[error("ERC satisfied: no defeating instance")]
    ErcSatisfied,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {context}")]
    MalformedMatrixFile {
        path: PathBuf,
        line: usize,
        context: String,
    },
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
        }
    }

    pub(crate) fn param(context: impl Into<String>) -> Self {
        Error::InvalidParameter {
            context: context.into(),
        }
    }
}
