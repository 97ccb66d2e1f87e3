use thiserror::Error;

use crate::world::Role;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("could not place all entities within {0} retries")]
    Placement(usize),
    #[error("{role:?} actions given for ids {given:?}, active ids are {expected:?}")]
    ActionMismatch {
        role: Role,
        expected: Vec<usize>,
        given: Vec<usize>,
    },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown policy variant `{0}`")]
    UnknownVariant(String),
    #[error("checkpoint variant `{found}` does not match expected `{expected}`")]
    VariantMismatch { expected: String, found: String },
    #[error(transparent)]
    Kernel(#[from] encircle_kernel::KernelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
