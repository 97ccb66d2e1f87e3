use serde::{Deserialize, Serialize};

use crate::world::WorldConfig;

/// Entity counts used from `start_step` (inclusive) up to `end_step`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumStage {
    pub start_step: u64,
    pub end_step: u64,
    pub pursuers: usize,
    pub evaders: usize,
    pub obstacles: usize,
    pub vortices: usize,
}

impl CurriculumStage {
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (self.pursuers, self.evaders, self.obstacles, self.vortices)
    }

    pub fn apply(&self, world: &WorldConfig) -> WorldConfig {
        world
            .clone()
            .with_counts(self.pursuers, self.evaders, self.obstacles, self.vortices)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curriculum {
    pub stages: Vec<CurriculumStage>,
}

const MILLION: u64 = 1_000_000;

impl Curriculum {
    /// The five-stage schedule over seven million steps.
    pub fn standard() -> Self {
        let rows = [
            (0, 2, 3, 1, 0, 4),
            (2, 4, 4, 1, 1, 6),
            (4, 5, 7, 2, 2, 8),
            (5, 6, 11, 3, 4, 8),
            (6, 7, 15, 4, 6, 8),
        ];
        Self {
            stages: rows
                .iter()
                .map(|&(s, e, p, ev, o, v)| CurriculumStage {
                    start_step: s * MILLION,
                    end_step: e * MILLION,
                    pursuers: p,
                    evaders: ev,
                    obstacles: o,
                    vortices: v,
                })
                .collect(),
        }
    }

    /// A single stage covering every step.
    pub fn fixed(pursuers: usize, evaders: usize, obstacles: usize, vortices: usize) -> Self {
        Self {
            stages: vec![CurriculumStage {
                start_step: 0,
                end_step: u64::MAX,
                pursuers,
                evaders,
                obstacles,
                vortices,
            }],
        }
    }

    /// Same proportions with every boundary multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |s: u64| {
            if s == u64::MAX {
                s
            } else {
                (s as f64 * factor).round() as u64
            }
        };
        Self {
            stages: self
                .stages
                .iter()
                .map(|s| CurriculumStage {
                    start_step: scale(s.start_step),
                    end_step: scale(s.end_step),
                    ..*s
                })
                .collect(),
        }
    }

    /// Checks the stages are non-empty, ordered, contiguous and start at 0.
    pub fn is_well_formed(&self) -> bool {
        !self.stages.is_empty()
            && self.stages[0].start_step == 0
            && self.stages.iter().all(|s| s.start_step < s.end_step)
            && self.stages.windows(2).all(|w| w[0].end_step == w[1].start_step)
    }

    /// Stage whose half-open range contains `t`; steps at or past the last
    /// boundary map to the final stage.
    pub fn stage_at(&self, t: u64) -> &CurriculumStage {
        self.stages
            .iter()
            .find(|s| s.start_step <= t && t < s.end_step)
            .unwrap_or_else(|| self.stages.last().expect("curriculum has stages"))
    }
}

/// Stage of the standard schedule at step `t`.
pub fn curriculum_stage_at(t: u64) -> CurriculumStage {
    *Curriculum::standard().stage_at(t)
}
