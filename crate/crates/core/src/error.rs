use thiserror::Error;

/// Errors raised by the segmental model library.
#[derive(Debug, Error)]
pub enum SwanError {
    #[error("unknown token {0}")]
    UnknownToken(String),

    #[error("duplicate token {0} in vocabulary")]
    DuplicateToken(String),

    #[error("vocabulary must contain at least one token")]
    EmptyVocab,

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: usize, size: usize },

    #[error("invalid input sequence: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible target: {target_len} tokens cannot be emitted by {input_len} inputs with segments of at most {max_seg_len}")]
    Infeasible {
        target_len: usize,
        input_len: usize,
        max_seg_len: usize,
    },

    #[error("infeasible target")]
    InfeasibleTarget,

    #[error("empty segments are not permitted without a sequence input (target length is 0)")]
    EmptyCase1Target,

    #[error("non-finite activation at input {t}, segment start {j}")]
    NonFinite { t: usize, j: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("enumeration of {count} items exceeds the cap of {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SwanError> = std::result::Result<T, E>;
