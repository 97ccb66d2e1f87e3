//! Line-delimited JSON trajectory records, one line per timestep.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::world::{Role, Status, WorldState};
use crate::SimError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotRecord {
    pub id: usize,
    pub role: Role,
    pub status: Status,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub robots: Vec<RobotRecord>,
}

impl StepRecord {
    pub fn from_world(world: &WorldState) -> Self {
        Self {
            t: world.t,
            robots: world
                .robots
                .iter()
                .map(|r| RobotRecord {
                    id: r.id,
                    role: r.role,
                    status: r.status,
                    x: r.position.x,
                    y: r.position.y,
                    heading: r.heading,
                    speed: r.speed,
                })
                .collect(),
        }
    }
}

pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn record(&mut self, world: &WorldState) -> Result<(), SimError> {
        serde_json::to_writer(&mut self.out, &StepRecord::from_world(world))?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<Vec<StepRecord>, SimError> {
    input
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|line| Ok(serde_json::from_str(&line?)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{init_episode, WorldConfig};

    #[test]
    fn one_line_per_step_and_parse_back() {
        let cfg = WorldConfig::default();
        let world = init_episode(&cfg, 5).unwrap();
        let mut w = TrajectoryWriter::new(Vec::new());
        w.record(&world).unwrap();
        w.record(&world).unwrap();
        let bytes = w.into_inner();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("{\"t\":0,\"robots\":[{\"id\":0,\"role\":\"pursuer\",\"status\":\"active\""));
        let back = read_trajectory(bytes.as_slice()).unwrap();
        assert_eq!(back[0], StepRecord::from_world(&world));
    }
}
