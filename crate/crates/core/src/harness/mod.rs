//! Scenario evaluation, metrics and result export.

mod scenario;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use scenario::{catalog_with_overrides, find_scenario, scenario_catalog, ScenarioSpec};

use crate::evader;
use crate::perception::ObservationBundle;
use crate::perception::assemble_observation;
use crate::policy::{Mode, Policy};
use crate::world::trajectory::TrajectoryWriter;
use crate::world::{init_episode, Action, Outcome, WorldConfig, WorldState};
use crate::SimError;

pub const BASE_SEED: u64 = 1000;

/// Decentralized pursuer controller: it sees one pursuer's observation only.
pub trait PursuerPolicy {
    fn name(&self) -> String;
    fn act(&mut self, obs: &ObservationBundle) -> usize;
}

/// Greedy evaluation of a learned policy (ε = 0, deterministic τ grid).
pub struct Greedy<'a>(pub &'a Policy);

impl PursuerPolicy for Greedy<'_> {
    fn name(&self) -> String {
        self.0.variant().to_string()
    }

    fn act(&mut self, obs: &ObservationBundle) -> usize {
        let mut unused = rand::rngs::mock::StepRng::new(0, 0);
        self.0.select_action(obs, 0.0, Mode::Eval, &mut unused)
    }
}

/// Always picks one fixed joint action.
pub struct Constant(pub usize);

impl PursuerPolicy for Constant {
    fn name(&self) -> String {
        "constant".into()
    }

    fn act(&mut self, _: &ObservationBundle) -> usize {
        self.0
    }
}

/// Uniformly random joint actions.
pub struct UniformRandom {
    rng: ChaCha8Rng,
    actions: usize,
}

impl UniformRandom {
    pub fn new(actions: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            actions,
        }
    }
}

impl PursuerPolicy for UniformRandom {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&mut self, _: &ObservationBundle) -> usize {
        self.rng.gen_range(0..self.actions)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: String,
    pub variant: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub timestep: u64,
    pub travel_time_s: f64,
    pub collided: usize,
    pub pursuers: usize,
}

impl TrialRecord {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::AllEncircled
    }
}

/// Plays one episode from an explicit initial state.
pub fn run_from_state<W: Write>(
    policy: &mut dyn PursuerPolicy,
    mut world: WorldState,
    cfg: &WorldConfig,
    cap: u64,
    mut trajectory: Option<&mut TrajectoryWriter<W>>,
) -> Result<(WorldState, Outcome), SimError> {
    if let Some(tw) = trajectory.as_deref_mut() {
        tw.record(&world)?;
    }
    loop {
        if let Some(outcome) = world.check_termination(cap) {
            return Ok((world, outcome));
        }
        let pursuer_actions: BTreeMap<usize, Action> = world
            .active_pursuers()
            .map(|p| {
                let obs = assemble_observation(p, &world, cfg);
                (p.id, cfg.pursuer_action(policy.act(&obs)))
            })
            .collect();
        let evader_actions: BTreeMap<usize, Action> = world
            .active_evaders()
            .map(|e| (e.id, evader::select_action(e, &world, cfg)))
            .collect();
        world = world.step(&pursuer_actions, &evader_actions, cfg)?.0;
        if let Some(tw) = trajectory.as_deref_mut() {
            tw.record(&world)?;
        }
    }
}

pub fn run_episode<W: Write>(
    policy: &mut dyn PursuerPolicy,
    scenario: &ScenarioSpec,
    base: &WorldConfig,
    seed: u64,
    trajectory: Option<&mut TrajectoryWriter<W>>,
) -> Result<TrialRecord, SimError> {
    let cfg = scenario.world(base);
    let world = init_episode(&cfg, seed)?;
    let (end, outcome) = run_from_state(policy, world, &cfg, scenario.episode_cap, trajectory)?;
    Ok(TrialRecord {
        scenario: scenario.name.clone(),
        variant: policy.name(),
        seed,
        outcome,
        timestep: end.t,
        travel_time_s: end.t as f64 * cfg.dt,
        collided: end.pursuers().filter(|p| p.status == crate::world::Status::Inactive).count(),
        pursuers: end.pursuers().count(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub trials: usize,
    pub success_rate: f64,
    /// Averaged over all episodes, successful or not.
    pub mean_travel_time_s: f64,
    pub std_travel_time_s: f64,
    pub collision_ratio: f64,
}

impl Metrics {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let n = records.len();
        if n == 0 {
            return Self {
                trials: 0,
                success_rate: 0.0,
                mean_travel_time_s: 0.0,
                std_travel_time_s: 0.0,
                collision_ratio: 0.0,
            };
        }
        let times: Vec<f64> = records.iter().map(|r| r.travel_time_s).collect();
        let mean = times.iter().sum::<f64>() / n as f64;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64;
        let collided: usize = records.iter().map(|r| r.collided).sum();
        let total: usize = records.iter().map(|r| r.pursuers).sum();
        Self {
            trials: n,
            success_rate: records.iter().filter(|r| r.success()).count() as f64 / n as f64,
            mean_travel_time_s: mean,
            std_travel_time_s: var.sqrt(),
            collision_ratio: if total == 0 { 0.0 } else { collided as f64 / total as f64 },
        }
    }
}

/// Trials on seeds `base_seed + i` for `i < scenario.trials`.
pub fn evaluate(
    policy: &mut dyn PursuerPolicy,
    scenario: &ScenarioSpec,
    base: &WorldConfig,
    base_seed: u64,
) -> Result<(Metrics, Vec<TrialRecord>), SimError> {
    let records = (0..scenario.trials as u64)
        .map(|i| run_episode::<std::io::Sink>(policy, scenario, base, base_seed + i, None))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((Metrics::from_records(&records), records))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    JsonLines,
}

impl std::str::FromStr for ExportFormat {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" | "json-lines" => Ok(ExportFormat::JsonLines),
            other => Err(SimError::Config(format!("unknown export format `{other}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    scenario: String,
    variant: String,
    seed: u64,
    outcome: String,
    travel_time_s: f64,
    collided: usize,
    pursuers: usize,
}

fn sorted(records: &[TrialRecord]) -> Vec<&TrialRecord> {
    let mut v: Vec<&TrialRecord> = records.iter().collect();
    v.sort_by(|a, b| (&a.scenario, &a.variant, a.seed).cmp(&(&b.scenario, &b.variant, b.seed)));
    v
}

const CSV_HEADER: [&str; 7] = ["scenario", "variant", "seed", "outcome", "travel_time_s", "collided", "pursuers"];

/// Writes records ordered by (scenario, variant, seed).
pub fn export_results<W: Write>(records: &[TrialRecord], out: W, format: ExportFormat) -> Result<(), SimError> {
    match format {
        ExportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in sorted(records) {
                w.serialize(CsvRow {
                    scenario: r.scenario.clone(),
                    variant: r.variant.clone(),
                    seed: r.seed,
                    outcome: r.outcome.as_str().to_string(),
                    travel_time_s: r.travel_time_s,
                    collided: r.collided,
                    pursuers: r.pursuers,
                })?;
            }
            w.flush()?;
        }
        ExportFormat::JsonLines => {
            let mut out = out;
            for r in sorted(records) {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

/// Parses an export back into records. CSV rows carry no timestep, so it is
/// recovered from the travel time and `dt`.
pub fn import_results<R: BufRead>(input: R, format: ExportFormat, dt: f64) -> Result<Vec<TrialRecord>, SimError> {
    match format {
        ExportFormat::Csv => {
            let mut r = csv::Reader::from_reader(input);
            r.deserialize::<CsvRow>()
                .map(|row| {
                    let row = row?;
                    Ok(TrialRecord {
                        outcome: row.outcome.parse()?,
                        timestep: (row.travel_time_s / dt).round() as u64,
                        scenario: row.scenario,
                        variant: row.variant,
                        seed: row.seed,
                        travel_time_s: row.travel_time_s,
                        collided: row.collided,
                        pursuers: row.pursuers,
                    })
                })
                .collect()
        }
        ExportFormat::JsonLines => input
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| Ok(serde_json::from_str(&l?)?))
            .collect(),
    }
}
