use crate::geom::{Vec2, TAU};
use crate::world::{RobotState, Role, WorldConfig, WorldState};

/// Angular gaps between consecutive bearings (evader → pursuer), including
/// the wrap-around gap. The gaps sum to 2π; one pursuer yields `[2π]`.
///
/// Panics on an empty pursuer list.
pub fn angular_gaps(evader: Vec2, pursuers: &[Vec2]) -> Vec<f64> {
    assert!(!pursuers.is_empty(), "angular gaps need at least one pursuer");
    let mut bearings: Vec<f64> = pursuers
        .iter()
        .map(|&p| {
            let b = (p - evader).angle();
            if b < 0.0 {
                b + TAU
            } else {
                b
            }
        })
        .collect();
    bearings.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = bearings.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.push(TAU - (bearings[bearings.len() - 1] - bearings[0]));
    gaps
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Active pursuers whose centers lie within `d_encircle` of the evader.
pub fn pursuers_in_radius<'a>(
    evader: &RobotState,
    world: &'a WorldState,
    cfg: &WorldConfig,
) -> Vec<&'a RobotState> {
    world
        .robots
        .iter()
        .filter(|r| {
            r.role == Role::Pursuer
                && r.is_active()
                && r.position.distance(evader.position) <= cfg.d_encircle
        })
        .collect()
}

/// Checks the encirclement conditions against an explicit ring of pursuer
/// positions: at least three pursuers, widest gap ≤ ψ, widest ≤ κ · narrowest.
pub fn ring_satisfies(evader: Vec2, ring: &[Vec2], cfg: &WorldConfig) -> bool {
    if ring.len() < 3 {
        return false;
    }
    let gaps = angular_gaps(evader, ring);
    let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    max <= cfg.psi && max <= cfg.kappa * min
}

pub fn is_encircled(evader: &RobotState, world: &WorldState, cfg: &WorldConfig) -> bool {
    let ring: Vec<Vec2> = pursuers_in_radius(evader, world, cfg)
        .iter()
        .map(|p| p.position)
        .collect();
    ring_satisfies(evader.position, &ring, cfg)
}
