//! Per-pursuer shaped rewards. Rewards may read global state; only the
//! policy is restricted to local observations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geom::TAU;
use crate::world::encirclement::{angular_gaps, pursuers_in_radius, std_dev};
use crate::world::{surface_distance, RobotState, StepEvents, WorldConfig, WorldState};

pub const COLLISION_PENALTY: f64 = -80.0;
pub const DANGER_PENALTY: f64 = -5.0;
pub const APPROACH_REWARD: f64 = 5.0;
pub const APPROACH_DECAY: f64 = 0.05;
pub const CROWDING_PENALTY: f64 = -10.0;
pub const COOPERATION_REWARD: f64 = 5.0;
pub const COOPERATION_SLOPE: f64 = 0.3;
pub const IMBALANCE_PENALTY: f64 = -10.0;
pub const BOUNDARY_PENALTY: f64 = -5.0;
pub const COMPLETION_SCALE: f64 = 120.0;
pub const TIME_PENALTY: f64 = -1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_d1: f64,
    pub r_d2_sum: f64,
    pub r_coop: f64,
    pub r_boundary: f64,
    pub r_completion: f64,
    pub r_time: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn parts_sum(&self) -> f64 {
        self.r_d1 + self.r_d2_sum + self.r_coop + self.r_boundary + self.r_completion + self.r_time
    }
}

/// Collision / danger term from the smallest surface distance.
pub fn r_d1(d_min: f64, cfg: &WorldConfig) -> f64 {
    if d_min < 0.0 {
        COLLISION_PENALTY
    } else if d_min < cfg.d_safe {
        DANGER_PENALTY
    } else {
        0.0
    }
}

/// Approach term for one evader at surface distance `d_e`.
pub fn r_d2(d_e: f64, cfg: &WorldConfig) -> f64 {
    if d_e < cfg.d_safe {
        0.0
    } else if d_e <= cfg.d_encircle {
        APPROACH_REWARD
    } else {
        APPROACH_REWARD * (-APPROACH_DECAY * (d_e - cfg.d_encircle)).exp()
    }
}

/// Reward paid to each of the `p` pursuers near one evader.
pub fn cooperation_term(p: usize) -> f64 {
    if p >= 5 {
        CROWDING_PENALTY
    } else if p >= 3 {
        COOPERATION_REWARD * (1.0 - COOPERATION_SLOPE * (p as f64 - 3.0)).max(0.0)
    } else {
        0.0
    }
}

/// 120 · (2π/n_k) · e^(−σ). Panics when fewer than three pursuers take part.
pub fn completion(n_k: usize, sigma: f64) -> f64 {
    assert!(n_k >= 3, "encirclement needs at least three pursuers");
    COMPLETION_SCALE * (TAU / n_k as f64) * (-sigma).exp()
}

/// (r_d1, r_d2_sum) for one pursuer against the entities it can observe.
pub fn safety_guidance(pursuer: &RobotState, world: &WorldState, cfg: &WorldConfig) -> (f64, f64) {
    let mut d_min = f64::INFINITY;
    for mate in world.active_pursuers().filter(|m| m.id != pursuer.id) {
        if mate.position.distance(pursuer.position) <= cfg.r_percept {
            d_min = d_min.min(surface_distance(pursuer, mate));
        }
    }
    for o in &world.obstacles {
        if o.center.distance(pursuer.position) <= cfg.r_percept {
            d_min = d_min.min(surface_distance(pursuer, o));
        }
    }
    let mut d2 = 0.0;
    for e in world.active_evaders() {
        let d = surface_distance(pursuer, e);
        d_min = d_min.min(d);
        d2 += r_d2(d, cfg);
    }
    (r_d1(d_min, cfg), d2)
}

/// Cooperation reward for every active pursuer, computed separately per
/// evader and summed.
pub fn cooperation(world: &WorldState, cfg: &WorldConfig) -> BTreeMap<usize, f64> {
    let reach = 3.0 * cfg.d_encircle;
    let mut out: BTreeMap<usize, f64> = world.active_pursuers().map(|p| (p.id, 0.0)).collect();
    let mut sparse = false;
    let mut crowded = false;
    for e in world.active_evaders() {
        let near: Vec<usize> = world
            .active_pursuers()
            .filter(|p| p.position.distance(e.position) <= reach)
            .map(|p| p.id)
            .collect();
        let p = near.len();
        sparse |= p < 3;
        crowded |= p > 5;
        let r = cooperation_term(p);
        for id in near {
            *out.get_mut(&id).expect("active pursuer") += r;
        }
    }
    if sparse && crowded {
        out.values_mut().for_each(|v| *v += IMBALANCE_PENALTY);
    }
    out
}

pub fn boundary_penalty(events: &StepEvents) -> BTreeMap<usize, f64> {
    events
        .out_of_bounds_pursuer_ids
        .iter()
        .map(|&id| (id, BOUNDARY_PENALTY))
        .collect()
}

/// Completion rewards for the evaders encircled this step, keyed by the
/// pursuers forming each ring.
pub fn completion_rewards(world_after: &WorldState, events: &StepEvents, cfg: &WorldConfig) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for &e in &events.newly_encircled_evader_ids {
        let evader = world_after.robot(e);
        let ring = pursuers_in_radius(evader, world_after, cfg);
        let positions: Vec<_> = ring.iter().map(|p| p.position).collect();
        let sigma = std_dev(&angular_gaps(evader.position, &positions));
        let r = completion(ring.len(), sigma);
        for p in ring {
            *out.entry(p.id).or_insert(0.0) += r;
        }
    }
    out
}

/// Rewards for every pursuer that was active when the step began.
pub fn step_rewards(
    world_before: &WorldState,
    world_after: &WorldState,
    events: &StepEvents,
    cfg: &WorldConfig,
) -> BTreeMap<usize, RewardBreakdown> {
    let coop = cooperation(world_after, cfg);
    let boundary = boundary_penalty(events);
    let done = completion_rewards(world_after, events, cfg);
    world_before
        .active_pursuers()
        .map(|p| {
            let after = world_after.robot(p.id);
            let (mut d1, d2) = safety_guidance(after, world_after, cfg);
            if events.collided_pursuer_ids.contains(&p.id) {
                d1 = COLLISION_PENALTY;
            }
            let mut b = RewardBreakdown {
                r_d1: d1,
                r_d2_sum: d2,
                r_coop: coop.get(&p.id).copied().unwrap_or(0.0),
                r_boundary: boundary.get(&p.id).copied().unwrap_or(0.0),
                r_completion: done.get(&p.id).copied().unwrap_or(0.0),
                r_time: TIME_PENALTY,
                total: 0.0,
            };
            b.total = b.parts_sum();
            (p.id, b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::world::Role;
    use std::f64::consts::PI;

    fn robot(x: f64, y: f64) -> RobotState {
        RobotState::new(0, Role::Pursuer, Vec2::new(x, y), 0.0, 0.5)
    }

    #[test]
    fn r_d2_branches() {
        let cfg = WorldConfig::default();
        assert_eq!(r_d2(1.999, &cfg), 0.0);
        assert_eq!(r_d2(2.0, &cfg), 5.0);
        assert_eq!(r_d2(5.0, &cfg), 5.0);
        assert!((r_d2(25.0, &cfg) - 5.0 / std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn cooperation_table() {
        assert_eq!(cooperation_term(2), 0.0);
        assert_eq!(cooperation_term(3), 5.0);
        assert_eq!(cooperation_term(4), 5.0 * (1.0 - 0.3));
        assert_eq!(cooperation_term(5), -10.0);
        assert_eq!(cooperation_term(9), -10.0);
    }

    #[test]
    fn completion_values() {
        assert!((completion(3, 0.0) - 80.0 * PI).abs() < 1e-12);
        assert!((completion(6, 0.0) - 40.0 * PI).abs() < 1e-12);
        assert!(completion(3, 50.0) < 1e-18);
    }

    #[test]
    #[should_panic]
    fn completion_rejects_small_rings() {
        completion(2, 0.0);
    }

    #[test]
    fn idle_far_pursuer_only_pays_time() {
        let cfg = WorldConfig::default();
        let pursuers = vec![robot(-30.0, 0.0), robot(0.0, 30.0), robot(30.0, -30.0)];
        let w = WorldState::from_parts(pursuers, vec![], vec![], vec![], 0);
        let r = step_rewards(&w, &w, &StepEvents::default(), &cfg);
        assert!(r.values().all(|b| b.total == -1.0));
    }

    #[test]
    fn imbalance_penalty_hits_everyone() {
        let cfg = WorldConfig::default();
        let mut pursuers: Vec<RobotState> = (0..6)
            .map(|k| {
                let p = Vec2::from_angle(k as f64 * TAU / 6.0) * 4.0;
                robot(p.x, p.y)
            })
            .collect();
        pursuers.push(robot(40.0, 40.0));
        let evaders = vec![robot(0.0, 0.0), robot(-40.0, -40.0)];
        let w = WorldState::from_parts(pursuers, evaders, vec![], vec![], 0);
        let c = cooperation(&w, &cfg);
        for id in 0..6 {
            assert_eq!(c[&id], -20.0);
        }
        assert_eq!(c[&6], -10.0);
    }
}
