use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what}: n = {n} exceeds the limit of {limit}")]
    SizeLimit {
        what: &'static str,
        n: usize,
        limit: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("weights are not in canonical (oddball) order")]
    NotCanonical,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("inconsistent stopping data: T = {t} < K = {k}")]
    Inconsistent { t: usize, k: usize },

    #[error("lemma hypothesis violated by sample {index}")]
    HypothesisViolated { index: usize },

    #[error("stopping-rule invariant violated: {0}")]
    InvariantViolated(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
