#![allow(dead_code)]

use std::f64::consts::PI;

use encircle_core::geom::Vec2;
use encircle_core::perception::{assemble_observation, ObservationBundle, Slots};
use encircle_core::world::{Obstacle, RobotState, Role, Status, WorldConfig, WorldState};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn robot(x: f64, y: f64, heading: f64, speed: f64) -> RobotState {
    let mut r = RobotState::new(0, Role::Pursuer, Vec2::new(x, y), heading, 0.5);
    r.speed = speed;
    r
}

/// Observation of pursuer 0 in a random cluttered scene.
pub fn random_observation<R: Rng>(rng: &mut R) -> ObservationBundle {
    let cfg = WorldConfig::default();
    let near = |rng: &mut R| {
        robot(
            rng.gen_range(-12.0..12.0),
            rng.gen_range(-12.0..12.0),
            rng.gen_range(-3.1..3.1),
            rng.gen_range(0.0..3.0),
        )
    };
    let pursuers: Vec<RobotState> = (0..rng.gen_range(1..8)).map(|_| near(rng)).collect();
    let evaders: Vec<RobotState> = (0..rng.gen_range(1..5)).map(|_| near(rng)).collect();
    let obstacles: Vec<Obstacle> = (0..rng.gen_range(0..7))
        .map(|_| Obstacle {
            center: Vec2::new(rng.gen_range(-14.0..14.0), rng.gen_range(-14.0..14.0)),
            radius: rng.gen_range(1.0..3.0),
        })
        .collect();
    let world = WorldState::from_parts(pursuers, evaders, obstacles, vec![], 0);
    assemble_observation(&world.robots[0], &world, &cfg)
}

fn scramble_slots<const W: usize, R: Rng>(s: &mut Slots<W>, rng: &mut R) {
    for (row, &m) in s.rows.iter_mut().zip(&s.mask) {
        if !m {
            row.iter_mut().for_each(|x| *x = rng.gen_range(-1e3..1e3));
        }
    }
}

/// Writes random garbage into every padded slot.
pub fn scramble_padding<R: Rng>(obs: &mut ObservationBundle, rng: &mut R) {
    scramble_slots(&mut obs.team, rng);
    scramble_slots(&mut obs.evaders, rng);
    scramble_slots(&mut obs.obstacles, rng);
}

fn shuffle_valid<const W: usize, R: Rng>(s: &mut Slots<W>, rng: &mut R) {
    let n = s.valid_count();
    s.rows[..n].shuffle(rng);
}

/// Reorders valid entities within each category.
pub fn shuffle_entities<R: Rng>(obs: &mut ObservationBundle, rng: &mut R) {
    shuffle_valid(&mut obs.team, rng);
    shuffle_valid(&mut obs.evaders, rng);
    shuffle_valid(&mut obs.obstacles, rng);
}

/// Brute-force encirclement check written without the library helpers.
pub fn oracle_encircled(evader: Vec2, pursuers: &[(Vec2, bool)], cfg: &WorldConfig) -> bool {
    let mut bearings = Vec::new();
    for &(p, active) in pursuers {
        let (dx, dy) = (p.x - evader.x, p.y - evader.y);
        if active && (dx * dx + dy * dy).sqrt() <= cfg.d_encircle {
            let mut b = dy.atan2(dx);
            if b < 0.0 {
                b += 2.0 * PI;
            }
            bearings.push(b);
        }
    }
    if bearings.len() < 3 {
        return false;
    }
    // insertion sort
    for i in 1..bearings.len() {
        let mut j = i;
        while j > 0 && bearings[j - 1] > bearings[j] {
            bearings.swap(j - 1, j);
            j -= 1;
        }
    }
    let n = bearings.len();
    let mut gaps = Vec::new();
    for i in 0..n {
        gaps.push(if i + 1 < n {
            bearings[i + 1] - bearings[i]
        } else {
            2.0 * PI - (bearings[n - 1] - bearings[0])
        });
    }
    let mut max = gaps[0];
    let mut min = gaps[0];
    for &g in &gaps {
        if g > max {
            max = g;
        }
        if g < min {
            min = g;
        }
    }
    max <= cfg.psi && max <= cfg.kappa * min
}

/// One evader with 1 to 8 pursuers scattered around the encirclement radius.
pub fn ring_scene<R: Rng>(rng: &mut R) -> (WorldState, Vec<(Vec2, bool)>) {
    let e = Vec2::new(rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0));
    let n = rng.gen_range(1..=8);
    let mut raw = Vec::new();
    let mut pursuers = Vec::new();
    for _ in 0..n {
        let p = e + Vec2::from_angle(rng.gen_range(-PI..PI)) * rng.gen_range(1.0..6.5);
        let mut r = robot(p.x, p.y, 0.0, 0.0);
        let active = rng.gen_bool(0.85);
        if !active {
            r.status = Status::Inactive;
        }
        raw.push((p, active));
        pursuers.push(r);
    }
    let ev = robot(e.x, e.y, 0.0, 0.0);
    (WorldState::from_parts(pursuers, vec![ev], vec![], vec![], 0), raw)
}
