//! Multi-robot multi-target encirclement: simulator, observations, rewards,
//! scripted evaders, attention policies, training and evaluation.

mod error;
pub mod evader;
pub mod geom;
pub mod harness;
pub mod perception;
pub mod policy;
pub mod rewards;
pub mod training;
pub mod world;

pub use error::SimError;
