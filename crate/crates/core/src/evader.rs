//! Scripted evaders steering by repulsive potential fields.

use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, Vec2};
use crate::world::{surface_distance, Action, RobotState, WorldConfig, WorldState};
use crate::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApfConfig {
    pub pursuer_gain: f64,
    pub obstacle_gain: f64,
    pub boundary_gain: f64,
    /// Repulsors farther than this (m) are ignored.
    pub influence_radius: f64,
}

impl Default for ApfConfig {
    fn default() -> Self {
        Self {
            pursuer_gain: 1.0,
            obstacle_gain: 0.6,
            boundary_gain: 0.8,
            influence_radius: 12.0,
        }
    }
}

impl ApfConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.pursuer_gain > 0.0
            && self.obstacle_gain > 0.0
            && self.boundary_gain > 0.0
            && self.influence_radius > 0.0
        {
            Ok(())
        } else {
            Err(SimError::Config("APF gains and influence radius must be positive".into()))
        }
    }
}

const MIN_DISTANCE: f64 = 0.05;
const ZERO_FORCE: f64 = 1e-12;

/// Unit flee direction for an evader.
///
/// Each active pursuer and obstacle within the influence radius pushes with
/// `gain / d²` along the line away from it; each arena wall closer than the
/// influence radius pushes inward with `gain / w²`. If nothing is in range
/// the current heading is kept. If repulsors cancel exactly, the evader
/// turns perpendicular to the strongest one, toward its current heading.
pub fn apf_direction(evader: &RobotState, world: &WorldState, cfg: &WorldConfig) -> Vec2 {
    let apf = &cfg.apf;
    let heading = Vec2::from_angle(evader.heading);
    let mut force = Vec2::ZERO;
    let mut strongest: Option<(f64, Vec2)> = None;
    let mut push = |dir: Vec2, magnitude: f64| {
        force += dir * magnitude;
        if strongest.map_or(true, |(m, _)| magnitude > m) {
            strongest = Some((magnitude, dir));
        }
    };

    for p in world.active_pursuers() {
        let rel = evader.position - p.position;
        let d = rel.norm();
        if d < apf.influence_radius && d > 0.0 {
            push(rel * (1.0 / d), apf.pursuer_gain / d.max(MIN_DISTANCE).powi(2));
        }
    }
    for o in &world.obstacles {
        let rel = evader.position - o.center;
        let d = rel.norm();
        let gap = surface_distance(evader, o);
        if gap < apf.influence_radius && d > 0.0 {
            push(rel * (1.0 / d), apf.obstacle_gain / gap.max(MIN_DISTANCE).powi(2));
        }
    }
    let h = cfg.arena_half_extent;
    let walls = [
        (h - evader.position.x, Vec2::new(-1.0, 0.0)),
        (h + evader.position.x, Vec2::new(1.0, 0.0)),
        (h - evader.position.y, Vec2::new(0.0, -1.0)),
        (h + evader.position.y, Vec2::new(0.0, 1.0)),
    ];
    for (w, inward) in walls {
        if w < apf.influence_radius {
            push(inward, apf.boundary_gain / w.max(MIN_DISTANCE).powi(2));
        }
    }

    let Some((_, dominant)) = strongest else {
        return heading;
    };
    let n = force.norm();
    if n > ZERO_FORCE {
        return force * (1.0 / n);
    }
    let side = dominant.perp();
    if side.dot(heading) >= 0.0 {
        side
    } else {
        -side
    }
}

/// Discrete evader action: the turn rate that lands closest to the flee
/// bearing (ties toward the smallest |ω|), and full acceleration unless the
/// flee bearing is more than π/2 off the current heading.
pub fn select_action(evader: &RobotState, world: &WorldState, cfg: &WorldConfig) -> Action {
    let desired = apf_direction(evader, world, cfg).angle();
    let mut omegas = cfg.evader_omegas.clone();
    omegas.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    let mut best = omegas[0];
    let mut best_err = f64::INFINITY;
    for &w in &omegas {
        let err = wrap_angle(desired - (evader.heading + w * cfg.dt)).abs();
        if err < best_err {
            best_err = err;
            best = w;
        }
    }

    let misalignment = wrap_angle(desired - evader.heading).abs();
    let accel = if misalignment > std::f64::consts::FRAC_PI_2 {
        min_of(&cfg.evader_accels)
    } else if evader.speed < cfg.evader_v_max {
        max_of(&cfg.evader_accels)
    } else {
        // at the cap: the smallest non-negative option, or the largest if none
        cfg.evader_accels
            .iter()
            .copied()
            .filter(|a| *a >= 0.0)
            .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))))
            .unwrap_or_else(|| max_of(&cfg.evader_accels))
    };
    Action::new(accel, best)
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Role;
    use std::f64::consts::PI;

    fn robot(x: f64, y: f64, heading: f64) -> RobotState {
        RobotState::new(0, Role::Pursuer, Vec2::new(x, y), heading, 0.5)
    }

    fn world_with(pursuers: Vec<RobotState>, evader: RobotState) -> WorldState {
        WorldState::from_parts(pursuers, vec![evader], vec![], vec![], 0)
    }

    #[test]
    fn flees_antipodal_to_single_threat() {
        let w = world_with(vec![robot(-4.0, 0.0, 0.0)], robot(0.0, 0.0, 1.0));
        let e = &w.robots[1];
        let d = apf_direction(e, &w, &WorldConfig::default());
        assert!((d.x - 1.0).abs() < 1e-12 && d.y.abs() < 1e-12);
    }

    #[test]
    fn symmetric_threats_break_toward_heading() {
        let cfg = WorldConfig::default();
        for (heading, expect_x) in [(0.3, 1.0), (PI - 0.3, -1.0)] {
            let w = world_with(vec![robot(0.0, 5.0, 0.0), robot(0.0, -5.0, 0.0)], robot(0.0, 0.0, heading));
            let d = apf_direction(&w.robots[2], &w, &cfg);
            assert!((d.x - expect_x).abs() < 1e-12 && d.y.abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn keeps_heading_without_threats() {
        let w = world_with(vec![robot(30.0, 30.0, 0.0)], robot(0.0, 0.0, 0.7));
        let d = apf_direction(&w.robots[1], &w, &WorldConfig::default());
        assert!((d.angle() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn wall_pushes_inward() {
        let cfg = WorldConfig::default();
        let w = world_with(vec![], robot(48.0, 0.0, 0.0));
        let d = apf_direction(&w.robots[0], &w, &cfg);
        assert!((d.x + 1.0).abs() < 1e-12);
    }

    #[test]
    fn omega_choice() {
        let cfg = WorldConfig::default();
        let w = world_with(vec![], robot(0.0, 0.0, 0.0));
        let a = select_action(&w.robots[0], &w, &cfg);
        assert_eq!(a.omega, 0.0);

        // threat placed so that the flee bearing is 0.3 rad to the left
        let away = Vec2::from_angle(0.3 + PI) * 5.0;
        let w = world_with(vec![robot(away.x, away.y, 0.0)], robot(0.0, 0.0, 0.0));
        let a = select_action(&w.robots[1], &w, &cfg);
        assert_eq!(a.omega, PI / 6.0);
    }

    #[test]
    fn acceleration_rules() {
        let cfg = WorldConfig::default();
        let mut e = robot(0.0, 0.0, 0.0);
        e.speed = 3.5;
        let w = world_with(vec![], e);
        assert_eq!(select_action(&w.robots[0], &w, &cfg).accel, 0.0);
        e.speed = 1.0;
        let w = world_with(vec![], e);
        assert_eq!(select_action(&w.robots[0], &w, &cfg).accel, 0.4);
        // threat straight ahead: flee bearing is behind, so brake
        let w = world_with(vec![robot(3.0, 0.0, 0.0)], e);
        assert_eq!(select_action(&w.robots[1], &w, &cfg).accel, -0.4);
    }
}
