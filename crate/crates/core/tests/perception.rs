mod common;

use std::f64::consts::PI;

use encircle_core::geom::{wrap_angle, Vec2};
use encircle_core::perception::{assemble_observation, ObservationBundle, ObservationRecord, Slots};
use encircle_core::world::{init_episode, Obstacle, Status, WorldConfig, WorldState};
use proptest::prelude::*;

fn transform(w: &WorldState, shift: Vec2, angle: f64) -> WorldState {
    let mut out = w.clone();
    for r in &mut out.robots {
        r.position = r.position.rotate(angle) + shift;
        r.heading = wrap_angle(r.heading + angle);
    }
    for o in &mut out.obstacles {
        o.center = o.center.rotate(angle) + shift;
    }
    out
}

fn slots_close<const W: usize>(a: &Slots<W>, b: &Slots<W>, tol: f64, angle_cols: &[usize]) -> bool {
    a.mask == b.mask
        && a.rows.iter().zip(&b.rows).all(|(x, y)| {
            x.iter().zip(y).enumerate().all(|(c, (u, v))| {
                let d = if angle_cols.contains(&c) { wrap_angle(u - v).abs() } else { (u - v).abs() };
                d <= tol
            })
        })
}

fn bundles_close(a: &ObservationBundle, b: &ObservationBundle, tol: f64) -> bool {
    a.ego.iter().zip(&b.ego).all(|(u, v)| (u - v).abs() <= tol)
        && slots_close(&a.team, &b.team, tol, &[5])
        && slots_close(&a.evaders, &b.evaders, tol, &[5, 6])
        && slots_close(&a.obstacles, &b.obstacles, tol, &[4])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rigid_motion_leaves_observations_unchanged(
        seed in 0u64..1000,
        dx in -20.0f64..20.0,
        dy in -20.0f64..20.0,
        angle in -PI..PI,
    ) {
        let cfg = WorldConfig::default().with_counts(12, 4, 6, 0);
        let mut w = init_episode(&cfg, seed).unwrap();
        for (k, r) in w.robots.iter_mut().enumerate() {
            r.speed = (k % 4) as f64 * 0.7;
        }
        let moved = transform(&w, Vec2::new(dx, dy), angle);
        for p in w.active_pursuers() {
            let a = assemble_observation(p, &w, &cfg);
            let b = assemble_observation(moved.robot(p.id), &moved, &cfg);
            prop_assert!(bundles_close(&a, &b, 1e-9));
        }
    }

    #[test]
    fn valid_rows_sorted_and_padding_zero(seed in 0u64..1000) {
        let cfg = WorldConfig {
            arena_half_extent: 20.0,
            ..WorldConfig::default()
        }
        .with_counts(12, 10, 7, 0);
        let w = init_episode(&cfg, seed).unwrap();
        for p in w.active_pursuers() {
            let o = assemble_observation(p, &w, &cfg);
            for (rows, mask, dcol) in [
                (o.team.rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), &o.team.mask, 4),
                (o.evaders.rows.iter().map(|r| r.to_vec()).collect(), &o.evaders.mask, 4),
                (o.obstacles.rows.iter().map(|r| r.to_vec()).collect(), &o.obstacles.mask, 3),
            ] {
                let n = mask.iter().filter(|&&m| m).count();
                prop_assert!(mask[..n].iter().all(|&m| m));
                prop_assert!(rows[..n].windows(2).all(|w| w[0][dcol] <= w[1][dcol]));
                prop_assert!(rows[n..].iter().all(|r| r.iter().all(|&x| x == 0.0)));
                prop_assert!(rows[..n].iter().all(|r| r[dcol] >= 0.0));
            }
            prop_assert!(o.ego[3] == 0.0 || o.ego[3] == 1.0);
            prop_assert_eq!(o.evaders.valid_count(), 8);
        }
    }
}

#[test]
fn encircled_and_inactive_entities_are_hidden() {
    let cfg = WorldConfig::default();
    let me = common::robot(0.0, 0.0, 0.0, 0.0);
    let mate = common::robot(3.0, 0.0, 0.0, 0.0);
    let mut gone = common::robot(0.0, 3.0, 0.0, 0.0);
    gone.status = Status::Inactive;
    let mut caught = common::robot(6.0, 6.0, 0.0, 0.0);
    caught.status = Status::Encircled;
    let free = common::robot(-9.0, 0.0, 0.0, 0.0);
    let w = WorldState::from_parts(vec![me, mate, gone], vec![caught, free], vec![], vec![], 0);
    let o = assemble_observation(&w.robots[0], &w, &cfg);
    assert_eq!(o.team.valid_count(), 1);
    assert_eq!(o.evaders.valid_count(), 1);
    assert_eq!(o.evaders.rows[0][4], 9.0);
    assert_eq!(o.ego[3], 1.0);
}

#[test]
fn equal_distances_break_ties_by_id() {
    let cfg = WorldConfig::default();
    let me = common::robot(0.0, 0.0, 0.0, 0.0);
    let a = common::robot(0.0, 4.0, 0.0, 0.0);
    let b = common::robot(0.0, -4.0, 0.0, 0.0);
    let w = WorldState::from_parts(vec![me, a, b], vec![], vec![], vec![], 0);
    let o = assemble_observation(&w.robots[0], &w, &cfg);
    // id 1 is at +y, which is ego-frame +y as well
    assert_eq!(o.team.rows[0][1], 4.0);
    assert_eq!(o.team.rows[1][1], -4.0);
}

#[test]
fn teammate_status_uses_its_own_proximity() {
    let cfg = WorldConfig::default();
    let me = common::robot(0.0, 0.0, 0.0, 0.0);
    let mate = common::robot(10.0, 0.0, 0.0, 0.0);
    let e = common::robot(24.0, 0.0, 0.0, 0.0);
    let w = WorldState::from_parts(vec![me, mate], vec![e], vec![], vec![], 0);
    let o = assemble_observation(&w.robots[0], &w, &cfg);
    assert_eq!(o.ego[3], 0.0);
    assert_eq!(o.team.rows[0][6], 1.0);
}

#[test]
fn dump_record_serializes_named_fields() {
    let cfg = WorldConfig::default();
    let me = common::robot(0.0, 0.0, PI / 2.0, 1.5);
    let obstacle = Obstacle {
        center: Vec2::new(0.0, 4.0),
        radius: 1.0,
    };
    let w = WorldState::from_parts(vec![me], vec![common::robot(0.0, 10.0, 0.0, 0.0)], vec![obstacle], vec![], 0);
    let o = assemble_observation(&w.robots[0], &w, &cfg);
    let rec = ObservationRecord::new(w.t, 0, &o);
    let json = serde_json::to_string(&rec).unwrap();
    assert!(json.contains("\"heading_error\"") && json.contains("\"d_nearest\":2.5"));
    assert_eq!(serde_json::from_str::<ObservationRecord>(&json).unwrap(), rec);
    assert_eq!(rec.ego.v_x, 1.5);
    assert!((rec.obstacles[0].p_x - 4.0).abs() < 1e-12 && rec.obstacles[0].p_y.abs() < 1e-12);
}
