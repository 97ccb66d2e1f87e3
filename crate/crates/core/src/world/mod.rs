//! Deterministic 2D pursuit–evasion environment.

mod config;
pub mod encirclement;
mod entities;
mod state;
pub mod trajectory;

pub use config::{Action, WorldConfig};
pub use encirclement::{angular_gaps, is_encircled};
pub use entities::{
    ambient_flow, integrate_robot, surface_distance, vortex_velocity, Body, Obstacle, RobotState, Role,
    Status, Vortex,
};
pub use state::{init_episode, Outcome, StepEvents, WorldState};
