use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::world::encirclement::is_encircled;
use crate::world::{
    ambient_flow, integrate_robot, surface_distance, Action, Obstacle, RobotState, Role, Status, Vortex,
    WorldConfig,
};
use crate::SimError;

/// Full simulation state. Robot `i` is stored at index `i`; pursuers come
/// first, then evaders.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub t: u64,
    pub robots: Vec<RobotState>,
    pub obstacles: Vec<Obstacle>,
    pub vortices: Vec<Vortex>,
    pub rng: ChaCha8Rng,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    pub collided_pursuer_ids: Vec<usize>,
    pub newly_encircled_evader_ids: Vec<usize>,
    pub out_of_bounds_pursuer_ids: Vec<usize>,
}

impl StepEvents {
    pub fn is_empty(&self) -> bool {
        self.collided_pursuer_ids.is_empty()
            && self.newly_encircled_evader_ids.is_empty()
            && self.out_of_bounds_pursuer_ids.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AllEncircled,
    PursuersDepleted,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::AllEncircled => "all_encircled",
            Outcome::PursuersDepleted => "pursuers_depleted",
            Outcome::Timeout => "timeout",
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "all_encircled" => Ok(Outcome::AllEncircled),
            "pursuers_depleted" => Ok(Outcome::PursuersDepleted),
            "timeout" => Ok(Outcome::Timeout),
            other => Err(SimError::Config(format!("unknown outcome `{other}`"))),
        }
    }
}

impl WorldState {
    /// Builds a state from explicit parts; ids are reassigned to match
    /// storage order (pursuers first).
    pub fn from_parts(
        pursuers: Vec<RobotState>,
        evaders: Vec<RobotState>,
        obstacles: Vec<Obstacle>,
        vortices: Vec<Vortex>,
        seed: u64,
    ) -> Self {
        let mut robots = Vec::with_capacity(pursuers.len() + evaders.len());
        for (role, list) in [(Role::Pursuer, pursuers), (Role::Evader, evaders)] {
            for mut r in list {
                r.id = robots.len();
                r.role = role;
                robots.push(r);
            }
        }
        Self {
            t: 0,
            robots,
            obstacles,
            vortices,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn robot(&self, id: usize) -> &RobotState {
        &self.robots[id]
    }

    pub fn pursuers(&self) -> impl Iterator<Item = &RobotState> {
        self.robots.iter().filter(|r| r.role == Role::Pursuer)
    }

    pub fn evaders(&self) -> impl Iterator<Item = &RobotState> {
        self.robots.iter().filter(|r| r.role == Role::Evader)
    }

    pub fn active_pursuers(&self) -> impl Iterator<Item = &RobotState> {
        self.pursuers().filter(|r| r.is_active())
    }

    pub fn active_evaders(&self) -> impl Iterator<Item = &RobotState> {
        self.evaders().filter(|r| r.is_active())
    }

    pub fn active_pursuer_ids(&self) -> Vec<usize> {
        self.active_pursuers().map(|r| r.id).collect()
    }

    pub fn active_evader_ids(&self) -> Vec<usize> {
        self.active_evaders().map(|r| r.id).collect()
    }

    pub fn is_out_of_bounds(&self, p: Vec2, cfg: &WorldConfig) -> bool {
        p.x.abs() > cfg.arena_half_extent || p.y.abs() > cfg.arena_half_extent
    }

    /// Advances one timestep.
    ///
    /// All active robots move simultaneously using the flow at their
    /// pre-step positions; then pursuer collisions are resolved, then
    /// encirclement is evaluated for every active evader.
    pub fn step(
        &self,
        pursuer_actions: &BTreeMap<usize, Action>,
        evader_actions: &BTreeMap<usize, Action>,
        cfg: &WorldConfig,
    ) -> Result<(WorldState, StepEvents), SimError> {
        check_action_ids(Role::Pursuer, pursuer_actions, self.active_pursuer_ids())?;
        check_action_ids(Role::Evader, evader_actions, self.active_evader_ids())?;

        let mut next = self.clone();
        for (robot, moved) in self.robots.iter().zip(next.robots.iter_mut()) {
            if !robot.is_active() {
                continue;
            }
            let (action, v_max) = match robot.role {
                Role::Pursuer => (pursuer_actions[&robot.id], cfg.pursuer_v_max),
                Role::Evader => (evader_actions[&robot.id], cfg.evader_v_max),
            };
            let flow = ambient_flow(&self.vortices, robot.position);
            *moved = integrate_robot(robot, action, flow, cfg.dt, v_max);
        }

        let mut events = StepEvents::default();
        let moved_pursuers: Vec<usize> = next.active_pursuer_ids();
        let active_evaders: Vec<usize> = next.active_evader_ids();
        let mut collided = vec![false; next.robots.len()];
        for (k, &i) in moved_pursuers.iter().enumerate() {
            let p = &next.robots[i];
            for &j in &moved_pursuers[k + 1..] {
                if surface_distance(p, &next.robots[j]) < 0.0 {
                    collided[i] = true;
                    collided[j] = true;
                }
            }
            if next.obstacles.iter().any(|o| surface_distance(p, o) < 0.0)
                || active_evaders
                    .iter()
                    .any(|&e| surface_distance(p, &next.robots[e]) < 0.0)
            {
                collided[i] = true;
            }
        }
        for &i in &moved_pursuers {
            if collided[i] {
                next.robots[i].status = Status::Inactive;
                events.collided_pursuer_ids.push(i);
            }
            if self.is_out_of_bounds(next.robots[i].position, cfg) {
                events.out_of_bounds_pursuer_ids.push(i);
            }
        }

        let newly: Vec<usize> = active_evaders
            .into_iter()
            .filter(|&e| is_encircled(&next.robots[e], &next, cfg))
            .collect();
        for &e in &newly {
            next.robots[e].status = Status::Encircled;
            next.robots[e].speed = 0.0;
        }
        events.newly_encircled_evader_ids = newly;
        next.t += 1;
        Ok((next, events))
    }

    /// Termination check with precedence all-encircled > depleted > timeout.
    pub fn check_termination(&self, limit: u64) -> Option<Outcome> {
        if self.evaders().all(|e| e.status == Status::Encircled) {
            Some(Outcome::AllEncircled)
        } else if self.active_pursuers().count() < 3 {
            Some(Outcome::PursuersDepleted)
        } else if self.t >= limit {
            Some(Outcome::Timeout)
        } else {
            None
        }
    }
}

fn check_action_ids(role: Role, actions: &BTreeMap<usize, Action>, active: Vec<usize>) -> Result<(), SimError> {
    let given: Vec<usize> = actions.keys().copied().collect();
    if given != active {
        return Err(SimError::ActionMismatch {
            role,
            expected: active,
            given,
        });
    }
    Ok(())
}

/// Random episode: obstacles, then pursuers, then evaders are placed
/// uniformly inside the arena with pairwise surface distance ≥ the spawn
/// margin; vortex centers are uniform in the arena.
pub fn init_episode(cfg: &WorldConfig, seed: u64) -> Result<WorldState, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = cfg.arena_half_extent;
    let mut bodies: Vec<(Vec2, f64)> = Vec::new();

    let mut place = |radius: f64, rng: &mut ChaCha8Rng| -> Result<Vec2, SimError> {
        let lim = h - radius;
        if lim <= 0.0 {
            return Err(SimError::Placement(cfg.spawn_retries));
        }
        for _ in 0..cfg.spawn_retries {
            let p = Vec2::new(rng.gen_range(-lim..lim), rng.gen_range(-lim..lim));
            if bodies
                .iter()
                .all(|&(c, r)| p.distance(c) - r - radius >= cfg.spawn_margin)
            {
                bodies.push((p, radius));
                return Ok(p);
            }
        }
        Err(SimError::Placement(cfg.spawn_retries))
    };

    let mut obstacles = Vec::with_capacity(cfg.obstacles);
    for _ in 0..cfg.obstacles {
        let [lo, hi] = cfg.obstacle_radius_range;
        let radius = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let center = place(radius, &mut rng)?;
        obstacles.push(Obstacle { center, radius });
    }
    let mut robots = Vec::with_capacity(cfg.pursuers + cfg.evaders);
    for i in 0..cfg.pursuers + cfg.evaders {
        let role = if i < cfg.pursuers {
            Role::Pursuer
        } else {
            Role::Evader
        };
        let position = place(cfg.robot_radius, &mut rng)?;
        let heading = rng.gen_range(-PI..PI);
        robots.push(RobotState::new(i, role, position, heading, cfg.robot_radius));
    }
    let mut vortices = Vec::with_capacity(cfg.vortices);
    for _ in 0..cfg.vortices {
        let center = Vec2::new(rng.gen_range(-h..h), rng.gen_range(-h..h));
        let [rlo, rhi] = cfg.vortex_core_radius_range;
        let core = if rhi > rlo { rng.gen_range(rlo..rhi) } else { rlo };
        let [glo, ghi] = cfg.vortex_circulation_range;
        let magnitude = if ghi > glo { rng.gen_range(glo..ghi) } else { glo };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        vortices.push(Vortex::new(center, sign * magnitude, core)?);
    }
    Ok(WorldState {
        t: 0,
        robots,
        obstacles,
        vortices,
        rng,
    })
}
