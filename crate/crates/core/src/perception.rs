//! Per-pursuer local observations in the pursuer's own frame.

use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, Vec2};
use crate::world::{surface_distance, Obstacle, RobotState, WorldConfig, WorldState};

pub const EGO_WIDTH: usize = 4;
pub const TEAM_WIDTH: usize = 7;
pub const EVADER_WIDTH: usize = 7;
pub const OBSTACLE_WIDTH: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Ego,
    Team,
    Obstacle,
    Evader,
}

impl EntityKind {
    /// Type identifier used by the type embedding.
    pub fn type_id(self) -> usize {
        match self {
            EntityKind::Ego => 0,
            EntityKind::Team => 1,
            EntityKind::Obstacle => 2,
            EntityKind::Evader => 3,
        }
    }

    pub fn width(self) -> usize {
        match self {
            EntityKind::Ego => EGO_WIDTH,
            EntityKind::Team => TEAM_WIDTH,
            EntityKind::Obstacle => OBSTACLE_WIDTH,
            EntityKind::Evader => EVADER_WIDTH,
        }
    }
}

/// Fixed-capacity list of entity vectors with a validity mask. Valid rows
/// come first, sorted by distance; padded rows are all zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Slots<const W: usize> {
    pub rows: Vec<[f64; W]>,
    pub mask: Vec<bool>,
}

impl<const W: usize> Slots<W> {
    fn padded(mut valid: Vec<[f64; W]>, capacity: usize) -> Self {
        valid.truncate(capacity);
        let n = valid.len();
        valid.resize(capacity, [0.0; W]);
        let mut mask = vec![false; capacity];
        mask[..n].iter_mut().for_each(|m| *m = true);
        Self { rows: valid, mask }
    }

    pub fn capacity(&self) -> usize {
        self.rows.len()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn valid_rows(&self) -> impl Iterator<Item = &[f64; W]> {
        self.rows.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(r, _)| r)
    }
}

/// The observation of one pursuer: ego, teammates, evaders, obstacles.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationBundle {
    pub ego: [f64; EGO_WIDTH],
    pub team: Slots<TEAM_WIDTH>,
    pub evaders: Slots<EVADER_WIDTH>,
    pub obstacles: Slots<OBSTACLE_WIDTH>,
}

/// Transforms a world point and velocity into the observer's frame.
pub fn to_ego_frame(observer: &RobotState, point: Vec2, velocity: Vec2) -> (Vec2, Vec2) {
    let p = (point - observer.position).rotate(-observer.heading);
    let v = velocity.rotate(-observer.heading);
    (p, v)
}

/// 1 if any still-active evader is within 3·d_encircle (inclusive).
pub fn pursuit_status<'a>(
    robot: &RobotState,
    evaders: impl IntoIterator<Item = &'a RobotState>,
    cfg: &WorldConfig,
) -> f64 {
    let reach = 3.0 * cfg.d_encircle;
    let engaged = evaders
        .into_iter()
        .any(|e| e.is_active() && e.position.distance(robot.position) <= reach);
    if engaged {
        1.0
    } else {
        0.0
    }
}

/// Smallest surface distance to an obstacle whose center is within the
/// perception radius; `r_percept` when none is.
pub fn nearest_obstacle_distance(robot: &RobotState, obstacles: &[Obstacle], cfg: &WorldConfig) -> f64 {
    obstacles
        .iter()
        .filter(|o| o.center.distance(robot.position) <= cfg.r_percept)
        .map(|o| surface_distance(robot, o))
        .fold(cfg.r_percept, f64::min)
}

/// Evader heading relative to the line of sight from the observer.
pub fn heading_error(observer: &RobotState, evader: &RobotState) -> f64 {
    let bearing = (evader.position - observer.position).angle();
    wrap_angle(evader.heading - bearing)
}

fn sorted_by_distance<T>(mut items: Vec<(f64, usize, T)>) -> Vec<T> {
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    items.into_iter().map(|(_, _, v)| v).collect()
}

pub fn assemble_observation(pursuer: &RobotState, world: &WorldState, cfg: &WorldConfig) -> ObservationBundle {
    let evaders: Vec<&RobotState> = world.active_evaders().collect();
    let own_status = pursuit_status(pursuer, evaders.iter().copied(), cfg);
    let (_, v_ego) = to_ego_frame(pursuer, pursuer.position, pursuer.velocity());
    let ego = [
        v_ego.x,
        v_ego.y,
        nearest_obstacle_distance(pursuer, &world.obstacles, cfg),
        own_status,
    ];

    let team = world
        .active_pursuers()
        .filter(|m| m.id != pursuer.id)
        .filter_map(|m| {
            let d = m.position.distance(pursuer.position);
            (d <= cfg.r_percept).then(|| {
                let (p, v) = to_ego_frame(pursuer, m.position, m.velocity());
                let status = pursuit_status(m, evaders.iter().copied(), cfg);
                (d, m.id, [p.x, p.y, v.x, v.y, d, wrap_angle(p.angle()), status])
            })
        })
        .collect();

    let evader_rows = evaders
        .iter()
        .map(|e| {
            let d = e.position.distance(pursuer.position);
            let (p, v) = to_ego_frame(pursuer, e.position, e.velocity());
            let err = heading_error(pursuer, e);
            (d, e.id, [p.x, p.y, v.x, v.y, d, wrap_angle(p.angle()), err])
        })
        .collect();

    let obstacle_rows = world
        .obstacles
        .iter()
        .enumerate()
        .filter_map(|(k, o)| {
            let d = o.center.distance(pursuer.position);
            (d <= cfg.r_percept).then(|| {
                let (p, _) = to_ego_frame(pursuer, o.center, Vec2::ZERO);
                (d, k, [p.x, p.y, o.radius, d, wrap_angle(p.angle())])
            })
        })
        .collect();

    ObservationBundle {
        ego,
        team: Slots::padded(sorted_by_distance(team), cfg.max_teammates),
        evaders: Slots::padded(sorted_by_distance(evader_rows), cfg.max_evaders),
        obstacles: Slots::padded(sorted_by_distance(obstacle_rows), cfg.max_obstacles),
    }
}

/// Named-field record of one observation, for debugging dumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub t: u64,
    pub pursuer_id: usize,
    pub ego: EgoRecord,
    pub team: Vec<TeamRecord>,
    pub evaders: Vec<EvaderRecord>,
    pub obstacles: Vec<ObstacleRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoRecord {
    pub v_x: f64,
    pub v_y: f64,
    pub d_nearest: f64,
    pub pursuit_status: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeamRecord {
    pub p_x: f64,
    pub p_y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub d: f64,
    pub theta: f64,
    pub pursuit_status: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaderRecord {
    pub p_x: f64,
    pub p_y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub d: f64,
    pub theta: f64,
    pub heading_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleRecord {
    pub p_x: f64,
    pub p_y: f64,
    pub r: f64,
    pub d: f64,
    pub theta: f64,
}

impl ObservationRecord {
    /// Only valid slots are listed.
    pub fn new(t: u64, pursuer_id: usize, obs: &ObservationBundle) -> Self {
        Self {
            t,
            pursuer_id,
            ego: EgoRecord {
                v_x: obs.ego[0],
                v_y: obs.ego[1],
                d_nearest: obs.ego[2],
                pursuit_status: obs.ego[3],
            },
            team: obs
                .team
                .valid_rows()
                .map(|r| TeamRecord {
                    p_x: r[0],
                    p_y: r[1],
                    v_x: r[2],
                    v_y: r[3],
                    d: r[4],
                    theta: r[5],
                    pursuit_status: r[6],
                })
                .collect(),
            evaders: obs
                .evaders
                .valid_rows()
                .map(|r| EvaderRecord {
                    p_x: r[0],
                    p_y: r[1],
                    v_x: r[2],
                    v_y: r[3],
                    d: r[4],
                    theta: r[5],
                    heading_error: r[6],
                })
                .collect(),
            obstacles: obs
                .obstacles
                .valid_rows()
                .map(|r| ObstacleRecord {
                    p_x: r[0],
                    p_y: r[1],
                    r: r[2],
                    d: r[3],
                    theta: r[4],
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Role;
    use std::f64::consts::PI;

    fn robot(x: f64, y: f64, heading: f64) -> RobotState {
        RobotState::new(0, Role::Pursuer, Vec2::new(x, y), heading, 0.5)
    }

    #[test]
    fn ego_frame_cases() {
        let o = robot(0.0, 0.0, 0.0);
        let (p, v) = to_ego_frame(&o, Vec2::new(2.0, -1.0), Vec2::new(0.5, 0.25));
        assert_eq!((p, v), (Vec2::new(2.0, -1.0), Vec2::new(0.5, 0.25)));

        let o = robot(0.0, 0.0, PI / 2.0);
        let (p, _) = to_ego_frame(&o, Vec2::new(0.0, 1.0), Vec2::ZERO);
        assert!((p.x - 1.0).abs() < 1e-15 && p.y.abs() < 1e-15);

        let o = robot(3.0, -2.0, 2.1);
        let world = Vec2::new(-4.5, 7.25);
        let (p, _) = to_ego_frame(&o, world, Vec2::ZERO);
        let back = p.rotate(o.heading) + o.position;
        let (again, _) = to_ego_frame(&o, back, Vec2::ZERO);
        assert!((again - p).norm() < 1e-12);
    }

    #[test]
    fn pursuit_status_threshold() {
        let cfg = WorldConfig::default();
        let me = robot(0.0, 0.0, 0.0);
        let at = robot(15.0, 0.0, 0.0);
        assert_eq!(pursuit_status(&me, [&at], &cfg), 1.0);
        let beyond = robot(15.0 + 1e-9, 0.0, 0.0);
        assert_eq!(pursuit_status(&me, [&beyond], &cfg), 0.0);
        assert_eq!(pursuit_status(&me, [], &cfg), 0.0);
        let mut caught = at;
        caught.status = crate::world::Status::Encircled;
        assert_eq!(pursuit_status(&me, [&caught], &cfg), 0.0);
    }

    #[test]
    fn nearest_obstacle_cases() {
        let cfg = WorldConfig::default();
        let me = robot(0.0, 0.0, 0.0);
        assert_eq!(nearest_obstacle_distance(&me, &[], &cfg), 15.0);
        let a = Obstacle {
            center: Vec2::new(4.5, 0.0),
            radius: 1.0,
        };
        assert_eq!(nearest_obstacle_distance(&me, &[a], &cfg), 3.0);
        let b = Obstacle {
            center: Vec2::new(0.0, -2.5),
            radius: 1.0,
        };
        assert_eq!(nearest_obstacle_distance(&me, &[a, b], &cfg), 1.0);
    }

    #[test]
    fn heading_error_cases() {
        let me = robot(0.0, 0.0, 0.0);
        assert_eq!(heading_error(&me, &robot(5.0, 0.0, 0.0)), 0.0);
        let perpendicular = heading_error(&me, &robot(5.0, 0.0, PI / 2.0));
        assert!((perpendicular - PI / 2.0).abs() < 1e-15);
        assert_eq!(heading_error(&me, &robot(5.0, 0.0, PI)), -PI);
    }

    #[test]
    fn lone_pursuer_has_empty_masks() {
        let cfg = WorldConfig::default();
        let w = WorldState::from_parts(vec![robot(0.0, 0.0, 0.3)], vec![], vec![], vec![], 0);
        let obs = assemble_observation(&w.robots[0], &w, &cfg);
        assert_eq!(obs.ego, [0.0, 0.0, 15.0, 0.0]);
        assert_eq!(obs.team.valid_count(), 0);
        assert_eq!(obs.evaders.valid_count(), 0);
        assert_eq!(obs.obstacles.valid_count(), 0);
        assert_eq!(obs.evaders.capacity(), 8);
        assert!(obs.team.rows.iter().all(|r| r.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn caps_and_padding() {
        let cfg = WorldConfig::default();
        let obstacles: Vec<Obstacle> = (0..7)
            .map(|k| Obstacle {
                center: Vec2::from_angle(k as f64) * (3.0 + k as f64),
                radius: 0.5,
            })
            .collect();
        let evaders = vec![robot(30.0, 0.0, 0.0), robot(-40.0, 10.0, 1.0)];
        let w = WorldState::from_parts(vec![robot(0.0, 0.0, 0.0)], evaders, obstacles, vec![], 0);
        let obs = assemble_observation(&w.robots[0], &w, &cfg);
        assert_eq!(obs.obstacles.mask, vec![true; 5]);
        let ds: Vec<f64> = obs.obstacles.rows.iter().map(|r| r[3]).collect();
        assert_eq!(ds, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(obs.evaders.valid_count(), 2);
        assert!(obs.evaders.rows[2..].iter().all(|r| *r == [0.0; 7]));
        assert_eq!(obs.evaders.rows[0][4], 30.0);
    }
}
