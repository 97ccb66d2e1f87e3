use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, Vec2};
use crate::world::Action;
use crate::SimError;

/// Anything with a circular footprint.
pub trait Body {
    fn center(&self) -> Vec2;
    fn radius(&self) -> f64;
}

/// Distance between the two circles' surfaces; negative when they overlap.
pub fn surface_distance(a: &impl Body, b: &impl Body) -> f64 {
    a.center().distance(b.center()) - a.radius() - b.radius()
}

/// Rankine vortex: solid-body rotation inside the core, 1/r decay outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub center: Vec2,
    pub circulation: f64,
    pub core_radius: f64,
    pub core_angular_velocity: f64,
}

impl Vortex {
    pub fn new(center: Vec2, circulation: f64, core_radius: f64) -> Result<Self, SimError> {
        if !(core_radius > 0.0) {
            return Err(SimError::Config("vortex core radius must be positive".into()));
        }
        Ok(Self {
            center,
            circulation,
            core_radius,
            core_angular_velocity: circulation / (2.0 * PI * core_radius * core_radius),
        })
    }

    /// Signed tangential speed at distance `r` from the center.
    pub fn tangential_speed(&self, r: f64) -> f64 {
        let k = self.circulation / (2.0 * PI);
        if r <= self.core_radius {
            k * r / (self.core_radius * self.core_radius)
        } else {
            k / r
        }
    }

    /// Flow velocity at `p`: purely tangential, counter-clockwise for Γ > 0.
    pub fn velocity_at(&self, p: Vec2) -> Vec2 {
        let rel = p - self.center;
        let r = rel.norm();
        if r == 0.0 {
            return Vec2::ZERO;
        }
        rel.perp() * (self.tangential_speed(r) / r)
    }
}

pub fn vortex_velocity(v: &Vortex, p: Vec2) -> Vec2 {
    v.velocity_at(p)
}

/// Superposition of all vortex fields at `p`.
pub fn ambient_flow(vortices: &[Vortex], p: Vec2) -> Vec2 {
    vortices
        .iter()
        .fold(Vec2::ZERO, |acc, v| acc + v.velocity_at(p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

impl Body for Obstacle {
    fn center(&self) -> Vec2 {
        self.center
    }
    fn radius(&self) -> f64 {
        self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Pursuer,
    Evader,
}

/// Status only ever moves away from `Active`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    /// Deactivated by a collision.
    Inactive,
    Encircled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: usize,
    pub role: Role,
    pub position: Vec2,
    /// Radians in [−π, π).
    pub heading: f64,
    pub speed: f64,
    pub radius: f64,
    pub status: Status,
}

impl Body for RobotState {
    fn center(&self) -> Vec2 {
        self.position
    }
    fn radius(&self) -> f64 {
        self.radius
    }
}

impl RobotState {
    pub fn new(id: usize, role: Role, position: Vec2, heading: f64, radius: f64) -> Self {
        Self {
            id,
            role,
            position,
            heading: wrap_angle(heading),
            speed: 0.0,
            radius,
            status: Status::Active,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == Status::Active
    }

    /// Velocity from speed and heading, without environmental drift.
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.speed
    }
}

/// Unicycle update: turn, accelerate (clamped to [0, v_max]), then move
/// along the new heading plus the ambient drift.
pub fn integrate_robot(r: &RobotState, action: Action, flow: Vec2, dt: f64, v_max: f64) -> RobotState {
    let heading = wrap_angle(r.heading + action.omega * dt);
    let speed = (r.speed + action.accel * dt).clamp(0.0, v_max);
    let position = r.position + (Vec2::from_angle(heading) * speed + flow) * dt;
    RobotState {
        heading,
        speed,
        position,
        ..*r
    }
}
