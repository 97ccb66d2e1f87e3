//! Off-policy distributional TD training of the shared pursuer policy.

mod curriculum;
mod replay;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use encircle_kernel::{AdamConfig, ParamGrads, Tape};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use curriculum::{curriculum_stage_at, Curriculum, CurriculumStage};
pub use replay::{ReplayBuffer, Transition};

use crate::evader;
use crate::perception::assemble_observation;
use crate::policy::{argmax, mean_q, Layout, Mode, Policy, PolicyConfig};
use crate::rewards::step_rewards;
use crate::world::{init_episode, Action, Outcome, Status, WorldConfig, WorldState};
use crate::SimError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Environment steps to run.
    pub total_steps: u64,
    pub lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    /// Gradient updates between hard target-network copies.
    pub target_sync: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `total_steps` over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
    pub replay_capacity: usize,
    pub seed: u64,
    pub episode_cap: u64,
    /// Environment steps between gradient updates.
    pub train_every: u64,
    /// Environment steps before the first update.
    pub learning_starts: u64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    /// Environment steps between checkpoints; 0 keeps only the final one.
    pub checkpoint_every: u64,
    /// Multiplier applied to the standard schedule's boundaries.
    pub compression: f64,
    /// Factor applied to rewards before they enter the replay buffer.
    pub reward_scale: f64,
    /// Explicit schedule replacing the compressed standard one.
    pub curriculum: Option<Curriculum>,
    pub world: WorldConfig,
    pub policy: PolicyConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 7_000_000,
            lr: 5e-4,
            gamma: 0.99,
            batch_size: 64,
            target_sync: 1000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.3,
            replay_capacity: 100_000,
            seed: 0,
            episode_cap: 3000,
            train_every: 1,
            learning_starts: 1000,
            grad_clip: 10.0,
            checkpoint_every: 0,
            compression: 1.0,
            reward_scale: 1.0,
            curriculum: None,
            world: WorldConfig::default(),
            policy: PolicyConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.train_every == 0 || self.target_sync == 0 {
            return bad("batch_size, replay_capacity, train_every and target_sync must be positive");
        }
        if !(self.lr >= 0.0) || !(self.compression > 0.0) || self.episode_cap == 0 {
            return bad("lr must be non-negative, compression and episode_cap positive");
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return bad("reward_scale must be positive and finite");
        }
        if !self.curriculum().is_well_formed() {
            return bad("curriculum stages must be ordered, contiguous and start at 0");
        }
        self.world.validate()?;
        self.policy.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn curriculum(&self) -> Curriculum {
        self.curriculum
            .clone()
            .unwrap_or_else(|| Curriculum::standard().scaled(self.compression))
    }

    /// Linearly annealed exploration rate at environment step `t`.
    pub fn epsilon_at(&self, t: u64) -> f64 {
        let horizon = self.epsilon_decay_fraction * self.total_steps as f64;
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let frac = t as f64 / horizon;
        if frac >= 1.0 {
            return self.epsilon_end;
        }
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

/// Bootstrapped targets for one transition: `r + γ·Z_target(τ′_j, a*)` with
/// `a*` the greedy action of the target network, or `r` when done. The value
/// head yields a single target `r + γ·max_a Q_target`.
pub fn td_targets(target: &Policy, t: &Transition, gamma: f64, target_taus: &[f64]) -> Vec<f64> {
    let k = if target.variant().is_distributional() { target_taus.len() } else { 1 };
    if t.done || gamma == 0.0 {
        return vec![t.reward; k];
    }
    let z = target.quantiles(&t.next_observation, target_taus);
    let best = argmax(&mean_q(&z));
    (0..z.rows()).map(|j| t.reward + gamma * z.get(j, best)).collect()
}

/// Loss of one transition and its gradient (scaled by `weight`) added into
/// `grads`.
pub fn transition_loss(
    online: &Policy,
    t: &Transition,
    targets: Vec<f64>,
    taus: &[f64],
    weight: f64,
    grads: &mut ParamGrads,
) -> f64 {
    let kappa = online.config().huber_kappa;
    let mut tape = Tape::new(&online.store);
    let z = online.net.forward(&mut tape, &t.observation, taus, Layout::Compact);
    let pred = tape.select_col(z, t.action);
    let loss = if online.variant().is_distributional() {
        tape.quantile_huber(pred, targets, taus.to_vec(), kappa)
    } else {
        tape.huber_td(pred, targets, kappa)
    };
    tape.backward_into(loss, weight, grads);
    tape.value(loss).data()[0]
}

/// Mean loss over a batch with the gradient of that mean in `grads`.
pub fn batch_loss<R: Rng + ?Sized>(
    online: &Policy,
    target: &Policy,
    batch: &[&Transition],
    gamma: f64,
    rng: &mut R,
    grads: &mut ParamGrads,
) -> f64 {
    let cfg = online.config();
    let w = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for t in batch {
        let taus = online.sample_taus(cfg.online_quantiles, rng);
        let target_taus = online.sample_taus(cfg.target_quantiles, rng);
        let y = td_targets(target, t, gamma, &target_taus);
        total += transition_loss(online, t, y, &taus, w, grads);
    }
    total * w
}

/// Online and target networks with their optimizer state.
#[derive(Clone, Debug)]
pub struct Learner {
    pub online: Policy,
    pub target: Policy,
    pub updates: u64,
    adam: AdamConfig,
    gamma: f64,
    batch_size: usize,
    target_sync: u64,
    grad_clip: f64,
}

impl Learner {
    pub fn new(policy: Policy, cfg: &TrainConfig) -> Self {
        Self {
            target: policy.clone(),
            online: policy,
            updates: 0,
            adam: AdamConfig {
                lr: cfg.lr,
                ..AdamConfig::default()
            },
            gamma: cfg.gamma,
            batch_size: cfg.batch_size,
            target_sync: cfg.target_sync,
            grad_clip: cfg.grad_clip,
        }
    }

    /// One gradient update from a uniformly sampled batch. Returns `None`
    /// without touching anything when the buffer holds too few transitions.
    pub fn train_step<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Option<f64> {
        let batch = buffer.sample(self.batch_size, rng)?;
        let mut grads = ParamGrads::zeros_like(&self.online.store);
        let loss = batch_loss(&self.online, &self.target, &batch, self.gamma, rng, &mut grads);
        let store = &mut self.online.store;
        store.set_grads(&grads);
        if self.grad_clip > 0.0 {
            store.clip_grad_norm(self.grad_clip);
        }
        store.adam_step(&self.adam);
        self.updates += 1;
        if self.updates % self.target_sync == 0 {
            self.sync_target();
        }
        Some(loss)
    }

    pub fn sync_target(&mut self) {
        self.target
            .store
            .copy_values_from(&self.online.store)
            .expect("online and target share a layout");
    }
}

/// One row of the learning-curve log, written when an episode ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    /// Mean loss of the updates since the previous row.
    pub loss: Option<f64>,
    pub epsilon: f64,
    /// Per-pursuer mean of the summed episode rewards.
    pub episode_return: f64,
    pub success: bool,
}

pub fn write_log<W: std::io::Write>(rows: &[LogRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log<R: std::io::Read>(input: R) -> Result<Vec<LogRow>, SimError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub policy: Policy,
    pub log: Vec<LogRow>,
    pub updates: u64,
    pub episodes: u64,
    /// Checkpoint files written, in order.
    pub checkpoints: Vec<PathBuf>,
}

struct Episode {
    id: u64,
    world: WorldState,
    cfg: WorldConfig,
    returns: BTreeMap<usize, f64>,
}

fn start_episode(cfg: &TrainConfig, curriculum: &Curriculum, t: u64, id: u64, rng: &mut ChaCha8Rng) -> Result<Episode, SimError> {
    let world_cfg = curriculum.stage_at(t).apply(&cfg.world);
    let world = init_episode(&world_cfg, rng.gen())?;
    let returns = world.active_pursuers().map(|p| (p.id, 0.0)).collect();
    Ok(Episode {
        id,
        world,
        cfg: world_cfg,
        returns,
    })
}

/// Runs the full training loop. Checkpoints go to `checkpoint_dir` when
/// given, named `step_<N>.ckpt`.
pub fn run_training(cfg: &TrainConfig, checkpoint_dir: Option<&Path>) -> Result<TrainingRun, SimError> {
    cfg.validate()?;
    let curriculum = cfg.curriculum();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let policy = Policy::new(&cfg.policy, rng.gen())?;
    let mut learner = Learner::new(policy, cfg);
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut log = Vec::new();
    let mut checkpoints = Vec::new();
    let save = |p: &Policy, step: u64, list: &mut Vec<PathBuf>| -> Result<(), SimError> {
        if let Some(dir) = checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("step_{step}.ckpt"));
            p.save(&path)?;
            list.push(path);
        }
        Ok(())
    };
    save(&learner.online, 0, &mut checkpoints)?;

    let mut episodes = 0u64;
    let mut episode: Option<Episode> = None;
    let mut losses: Vec<f64> = Vec::new();
    for t in 0..cfg.total_steps {
        let ep = match episode.as_mut() {
            Some(ep) => ep,
            None => {
                episodes += 1;
                episode.insert(start_episode(cfg, &curriculum, t, episodes - 1, &mut rng)?)
            }
        };
        let epsilon = cfg.epsilon_at(t);
        let world = &ep.world;
        let observations: BTreeMap<usize, _> = world
            .active_pursuers()
            .map(|p| (p.id, assemble_observation(p, world, &ep.cfg)))
            .collect();
        let choices: BTreeMap<usize, usize> = observations
            .iter()
            .map(|(&id, obs)| (id, learner.online.select_action(obs, epsilon, Mode::Sample, &mut rng)))
            .collect();
        let pursuer_actions: BTreeMap<usize, Action> =
            choices.iter().map(|(&id, &k)| (id, ep.cfg.pursuer_action(k))).collect();
        let evader_actions: BTreeMap<usize, Action> = world
            .active_evaders()
            .map(|e| (e.id, evader::select_action(e, world, &ep.cfg)))
            .collect();
        let (next, events) = world.step(&pursuer_actions, &evader_actions, &ep.cfg)?;
        let rewards = step_rewards(world, &next, &events, &ep.cfg);
        let outcome = next.check_termination(cfg.episode_cap);
        let terminal = matches!(outcome, Some(Outcome::AllEncircled | Outcome::PursuersDepleted));

        for (id, obs) in observations {
            let after = next.robot(id);
            let reward = rewards[&id].total;
            *ep.returns.get_mut(&id).expect("tracked pursuer") += reward;
            buffer.push(Transition {
                next_observation: assemble_observation(after, &next, &ep.cfg),
                observation: obs,
                action: choices[&id],
                reward: reward * cfg.reward_scale,
                done: terminal || after.status != Status::Active,
                pursuer_id: id,
                episode_id: ep.id,
                step: t,
            });
        }
        ep.world = next;

        if t + 1 >= cfg.learning_starts && (t + 1) % cfg.train_every == 0 {
            if let Some(loss) = learner.train_step(&buffer, &mut rng) {
                losses.push(loss);
            }
        }

        if let Some(outcome) = outcome {
            let n = ep.returns.len().max(1) as f64;
            log.push(LogRow {
                step: t + 1,
                loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
                epsilon,
                episode_return: ep.returns.values().sum::<f64>() / n,
                success: outcome == Outcome::AllEncircled,
            });
            losses.clear();
            episode = None;
        }
        if cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0 && t + 1 < cfg.total_steps {
            save(&learner.online, t + 1, &mut checkpoints)?;
        }
    }
    if cfg.total_steps > 0 {
        save(&learner.online, cfg.total_steps, &mut checkpoints)?;
    }
    Ok(TrainingRun {
        policy: learner.online,
        log,
        updates: learner.updates,
        episodes,
        checkpoints,
    })
}
