//! Minimal differentiable numeric kernel: dense layers, masked attention and
//! pooling, Huber-type losses, Adam, and a versioned checkpoint container.

mod array;
pub mod checkpoint;
mod error;
mod layers;
pub mod ops;
mod params;
mod tape;

pub use array::Array;
pub use checkpoint::Checkpoint;
pub use error::KernelError;
pub use layers::{attend, Linear, Mlp, MultiHeadAttention};
pub use params::{AdamConfig, ParamGrads, ParamId, ParamStore};
pub use tape::{Tape, Var};
