use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::evader::ApfConfig;
use crate::SimError;

/// Commanded linear acceleration (m/s²) and angular velocity (rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub accel: f64,
    pub omega: f64,
}

impl Action {
    pub const IDLE: Action = Action {
        accel: 0.0,
        omega: 0.0,
    };

    pub fn new(accel: f64, omega: f64) -> Self {
        Self { accel, omega }
    }
}

/// Environment geometry, kinematic limits, entity counts and sampling ranges.
///
/// Every field can be set from a TOML file using the field name as key;
/// missing keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// The arena is the square [−h, h]².
    pub arena_half_extent: f64,
    pub dt: f64,
    pub d_encircle: f64,
    pub d_safe: f64,
    pub r_percept: f64,
    pub robot_radius: f64,
    pub spawn_margin: f64,
    /// Largest admissible angular gap in an encirclement.
    pub psi: f64,
    /// Largest admissible ratio between the widest and narrowest gap.
    pub kappa: f64,
    pub pursuer_v_max: f64,
    pub evader_v_max: f64,
    pub pursuer_accels: Vec<f64>,
    pub pursuer_omegas: Vec<f64>,
    pub evader_accels: Vec<f64>,
    pub evader_omegas: Vec<f64>,
    pub pursuers: usize,
    pub evaders: usize,
    pub obstacles: usize,
    pub vortices: usize,
    pub obstacle_radius_range: [f64; 2],
    pub vortex_core_radius_range: [f64; 2],
    /// Magnitude range of the circulation; the sign is drawn uniformly.
    pub vortex_circulation_range: [f64; 2],
    pub max_teammates: usize,
    pub max_obstacles: usize,
    pub max_evaders: usize,
    pub spawn_retries: usize,
    pub apf: ApfConfig,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            arena_half_extent: 50.0,
            dt: 0.5,
            d_encircle: 5.0,
            d_safe: 2.0,
            r_percept: 15.0,
            robot_radius: 0.5,
            spawn_margin: 2.0,
            psi: PI,
            kappa: 3.0,
            pursuer_v_max: 3.0,
            evader_v_max: 3.5,
            pursuer_accels: vec![-0.4, 0.0, 0.4],
            pursuer_omegas: vec![-PI / 6.0, 0.0, PI / 6.0],
            evader_accels: vec![-0.4, 0.0, 0.4],
            evader_omegas: vec![-PI / 6.0, -PI / 12.0, 0.0, PI / 12.0, PI / 6.0],
            pursuers: 3,
            evaders: 1,
            obstacles: 0,
            vortices: 4,
            obstacle_radius_range: [1.0, 3.0],
            vortex_core_radius_range: [2.0, 6.0],
            vortex_circulation_range: [10.0, 40.0],
            max_teammates: 5,
            max_obstacles: 5,
            max_evaders: 8,
            spawn_retries: 10_000,
            apf: ApfConfig::default(),
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::Config(msg.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.d_safe < self.d_encircle && self.d_encircle < self.r_percept) {
            return bad("require d_safe < d_encircle < r_percept");
        }
        if !(self.arena_half_extent > 0.0 && self.robot_radius > 0.0) {
            return bad("arena and robot radius must be positive");
        }
        if self.pursuer_accels.is_empty()
            || self.pursuer_omegas.is_empty()
            || self.evader_accels.is_empty()
            || self.evader_omegas.is_empty()
        {
            return bad("action sets must be non-empty");
        }
        if !(self.obstacle_radius_range[0] > 0.0
            && self.obstacle_radius_range[0] <= self.obstacle_radius_range[1])
        {
            return bad("obstacle radius range must be positive and ordered");
        }
        if !(self.vortex_core_radius_range[0] > 0.0
            && self.vortex_core_radius_range[0] <= self.vortex_core_radius_range[1])
        {
            return bad("vortex core radius range must be positive and ordered");
        }
        if self.vortex_circulation_range[0] > self.vortex_circulation_range[1] {
            return bad("vortex circulation range must be ordered");
        }
        self.apf.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: WorldConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Number of joint pursuer actions (acceleration × angular velocity).
    pub fn pursuer_action_count(&self) -> usize {
        self.pursuer_accels.len() * self.pursuer_omegas.len()
    }

    /// Joint index `k` maps to (accels[k / |ω|], omegas[k % |ω|]).
    pub fn pursuer_action(&self, index: usize) -> Action {
        let n = self.pursuer_omegas.len();
        Action::new(self.pursuer_accels[index / n], self.pursuer_omegas[index % n])
    }

    pub fn with_counts(mut self, pursuers: usize, evaders: usize, obstacles: usize, vortices: usize) -> Self {
        self.pursuers = pursuers;
        self.evaders = evaders;
        self.obstacles = obstacles;
        self.vortices = vortices;
        self
    }
}
