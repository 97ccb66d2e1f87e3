//! Shared pursuer policy: entity embeddings, relation extraction, target
//! selection and a quantile action head, with baseline and ablation variants.

mod config;
mod network;

use std::io::{Read, Write};
use std::path::Path;

use encircle_kernel::{Array, Checkpoint, ParamStore, Tape};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{tau_grid, PolicyConfig, Variant};
pub use network::{argmax, mean_q, LatentSet, Layout, PolicyNet};

use crate::perception::ObservationBundle;
use crate::SimError;

/// How τ values are drawn when scoring actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// `online_quantiles` fresh samples from U(0,1).
    Sample,
    /// Deterministic mid-point grid of `eval_quantiles` values.
    Eval,
}

/// A network together with its parameter values.
#[derive(Clone, Debug)]
pub struct Policy {
    pub net: PolicyNet,
    pub store: ParamStore,
}

impl Policy {
    pub fn new(cfg: &PolicyConfig, seed: u64) -> Result<Self, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let net = PolicyNet::new(cfg, &mut store, &mut rng)?;
        Ok(Self { net, store })
    }

    pub fn config(&self) -> &PolicyConfig {
        self.net.config()
    }

    pub fn variant(&self) -> Variant {
        self.config().variant
    }

    /// Quantile table (rows τ, columns actions) for one observation.
    pub fn quantiles(&self, obs: &ObservationBundle, taus: &[f64]) -> Array {
        let mut tape = Tape::new(&self.store);
        let z = self.net.forward(&mut tape, obs, taus, Layout::Compact);
        tape.value(z).clone()
    }

    pub fn q_values(&self, obs: &ObservationBundle, taus: &[f64]) -> Vec<f64> {
        mean_q(&self.quantiles(obs, taus))
    }

    pub fn sample_taus<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| loop {
                let t: f64 = rng.gen();
                if t > 0.0 {
                    break t;
                }
            })
            .collect()
    }

    /// ε-greedy joint action index from this pursuer's own observation.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        obs: &ObservationBundle,
        epsilon: f64,
        mode: Mode,
        rng: &mut R,
    ) -> usize {
        if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
            return rng.gen_range(0..self.config().actions);
        }
        let taus = match mode {
            Mode::Eval => tau_grid(self.config().eval_quantiles),
            Mode::Sample => self.sample_taus(self.config().online_quantiles, rng),
        };
        argmax(&self.q_values(obs, &taus))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let header = serde_json::to_vec(self.config()).expect("config serializes");
        Checkpoint::from_store(&self.store, header)
    }

    /// Rebuilds a policy from a checkpoint. When `expected` is given the
    /// stored variant must match it.
    pub fn from_checkpoint(ckpt: &Checkpoint, expected: Option<Variant>) -> Result<Self, SimError> {
        let cfg: PolicyConfig = serde_json::from_slice(&ckpt.header)?;
        if let Some(v) = expected {
            if v != cfg.variant {
                return Err(SimError::VariantMismatch {
                    expected: v.to_string(),
                    found: cfg.variant.to_string(),
                });
            }
        }
        let mut policy = Policy::new(&cfg, 0)?;
        ckpt.load_into(&mut policy.store)?;
        Ok(policy)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), SimError> {
        Ok(self.to_checkpoint().write_to(w)?)
    }

    pub fn read_from<R: Read>(r: R, expected: Option<Variant>) -> Result<Self, SimError> {
        Self::from_checkpoint(&Checkpoint::read_from(r)?, expected)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path, expected: Option<Variant>) -> Result<Self, SimError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), expected)
    }
}
