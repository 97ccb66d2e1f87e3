use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("arrays must have rank 1 or 2, got rank {0}")]
    Rank(usize),
    #[error("data length {found} does not match shape product {expected}")]
    DataLength { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("max-pool over a set with no valid rows")]
    EmptyPool,
    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
