use std::f64::consts::PI;
use std::rc::Rc;

use encircle_kernel::{attend, Array, Linear, Mlp, MultiHeadAttention, ParamId, ParamStore, Tape, Var};
use rand::Rng;

use super::{PolicyConfig, Variant};
use crate::perception::{
    EntityKind, ObservationBundle, Slots, EGO_WIDTH, EVADER_WIDTH, OBSTACLE_WIDTH, TEAM_WIDTH,
};
use crate::SimError;

/// How entity slots are laid out before the network runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Layout {
    /// Only valid entities become rows.
    #[default]
    Compact,
    /// Every slot becomes a row and padding is excluded through the mask.
    Padded,
}

/// Embedded entities: rows ordered ego, teammates, obstacles, evaders.
#[derive(Clone, Debug)]
pub struct LatentSet {
    pub e: Var,
    pub kinds: Vec<EntityKind>,
    pub mask: Rc<[bool]>,
}

impl LatentSet {
    pub fn rows(&self) -> usize {
        self.kinds.len()
    }

    /// Row range and mask of one category.
    pub fn category(&self, kind: EntityKind) -> (usize, usize, Rc<[bool]>) {
        let start = self.kinds.iter().position(|&k| k == kind).unwrap_or(self.kinds.len());
        let len = self.kinds[start..].iter().take_while(|&&k| k == kind).count();
        (start, len, self.mask[start..start + len].into())
    }
}

#[derive(Clone, Debug)]
struct TargetSelection {
    query: Linear,
    key: Linear,
    value: Linear,
}

#[derive(Clone, Debug)]
enum Head {
    Quantile { state: Linear, tau: Linear, out: Mlp },
    Value { state: Linear, out: Mlp },
}

/// Parameter handles of one policy network; values live in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct PolicyNet {
    cfg: PolicyConfig,
    ego: Mlp,
    team: Mlp,
    obstacle: Mlp,
    evader: Mlp,
    types: Option<ParamId>,
    relation: Vec<MultiHeadAttention>,
    selection: Option<TargetSelection>,
    head: Head,
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(cfg: &PolicyConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self, SimError> {
        cfg.validate()?;
        let f = cfg.latent_dim;
        let v = cfg.variant;
        let ego = Mlp::new(store, "embed.ego", &[EGO_WIDTH, f, f], rng)?;
        let team = Mlp::new(store, "embed.team", &[TEAM_WIDTH, f, f], rng)?;
        let obstacle = Mlp::new(store, "embed.obstacle", &[OBSTACLE_WIDTH, f, f], rng)?;
        let evader = Mlp::new(store, "embed.evader", &[EVADER_WIDTH, f, f], rng)?;
        let (types, relation) = if v.uses_relation_extraction() {
            let t = store.init_uniform("type_embedding", 4, f, rng)?;
            let layers = (0..cfg.relation_layers)
                .map(|i| MultiHeadAttention::new(store, &format!("relation.{i}"), f, cfg.heads, rng))
                .collect::<Result<_, _>>()?;
            (Some(t), layers)
        } else {
            (None, Vec::new())
        };
        let selection = if v.uses_target_selection() {
            Some(TargetSelection {
                query: Linear::new(store, "select.query", 2 * f, f, rng)?,
                key: Linear::new(store, "select.key", f, f, rng)?,
                value: Linear::new(store, "select.value", f, f, rng)?,
            })
        } else {
            None
        };
        let state = Linear::new(store, "head.state", cfg.head_input_dim(), f, rng)?;
        let head = if v.is_distributional() {
            Head::Quantile {
                state,
                tau: Linear::new(store, "head.tau", cfg.quantile_embedding, f, rng)?,
                out: Mlp::new(store, "head.out", &[f, f, cfg.actions], rng)?,
            }
        } else {
            Head::Value {
                state,
                out: Mlp::new(store, "head.out", &[f, f, cfg.actions], rng)?,
            }
        };
        Ok(Self {
            cfg: cfg.clone(),
            ego,
            team,
            obstacle,
            evader,
            types,
            relation,
            selection,
            head,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    fn embed_category<const W: usize>(
        &self,
        tape: &mut Tape,
        mlp: &Mlp,
        slots: &Slots<W>,
        layout: Layout,
    ) -> Option<(Var, Vec<bool>)> {
        let n = match layout {
            Layout::Compact => slots.valid_count(),
            Layout::Padded => slots.capacity(),
        };
        if n == 0 {
            return None;
        }
        let data = slots.rows[..n].iter().flatten().copied().collect();
        let x = tape.input(Array::from_rows(n, W, data));
        Some((mlp.forward(tape, x), slots.mask[..n].to_vec()))
    }

    /// Kind-specific embeddings of every entity row.
    pub fn embed_observations(&self, tape: &mut Tape, obs: &ObservationBundle, layout: Layout) -> LatentSet {
        let ego_in = tape.input(Array::row_vector(obs.ego.to_vec()));
        let mut parts = vec![self.ego.forward(tape, ego_in)];
        let mut kinds = vec![EntityKind::Ego];
        let mut mask = vec![true];
        let categories = [
            (EntityKind::Team, self.embed_category(tape, &self.team, &obs.team, layout)),
            (EntityKind::Obstacle, self.embed_category(tape, &self.obstacle, &obs.obstacles, layout)),
            (EntityKind::Evader, self.embed_category(tape, &self.evader, &obs.evaders, layout)),
        ];
        for (kind, cat) in categories {
            if let Some((e, m)) = cat {
                kinds.extend(std::iter::repeat(kind).take(m.len()));
                mask.extend(m);
                parts.push(e);
            }
        }
        let e = if parts.len() == 1 { parts[0] } else { tape.concat_rows(&parts) };
        LatentSet {
            e,
            kinds,
            mask: mask.into(),
        }
    }

    /// Adds the learned vector of each row's entity type.
    pub fn add_type_embeddings(&self, tape: &mut Tape, set: &LatentSet) -> LatentSet {
        let Some(types) = self.types else {
            return set.clone();
        };
        let mut onehot = Array::zeros(set.rows(), 4);
        for (r, k) in set.kinds.iter().enumerate() {
            onehot.set(r, k.type_id(), 1.0);
        }
        let onehot = tape.input(onehot);
        let t = tape.param(types);
        let added = tape.matmul(onehot, t);
        LatentSet {
            e: tape.add(set.e, added),
            ..set.clone()
        }
    }

    /// Stacked self-attention over all rows, keys restricted by the mask.
    pub fn relation_extraction(&self, tape: &mut Tape, set: &LatentSet) -> LatentSet {
        let mut x = set.e;
        for block in &self.relation {
            let a = block.forward(tape, x, x, set.mask.clone());
            x = if self.cfg.residual { tape.add(x, a) } else { a };
        }
        LatentSet { e: x, ..set.clone() }
    }

    fn ego_and_pool(&self, tape: &mut Tape, set: &LatentSet) -> Var {
        let ego = tape.slice_rows(set.e, 0, 1);
        let pooled = tape.masked_max_pool(set.e, &set.mask);
        tape.concat_cols(&[ego, pooled])
    }

    /// `[attention over evaders ‖ query]`, where the query projects the ego
    /// row and the max-pooled set.
    pub fn target_selection(&self, tape: &mut Tape, set: &LatentSet) -> Var {
        let sel = self.selection.as_ref().expect("variant without target selection");
        let joined = self.ego_and_pool(tape, set);
        let query = sel.query.forward(tape, joined);
        let (start, len, mask) = set.category(EntityKind::Evader);
        let context = if len == 0 {
            tape.input(Array::zeros(1, self.cfg.latent_dim))
        } else {
            let evaders = tape.slice_rows(set.e, start, len);
            let k = sel.key.forward(tape, evaders);
            let v = sel.value.forward(tape, evaders);
            attend(tape, query, k, v, mask, self.cfg.selection_heads)
        };
        tape.concat_cols(&[context, query])
    }

    fn category_means(&self, tape: &mut Tape, set: &LatentSet) -> Vec<(Var, bool)> {
        [EntityKind::Ego, EntityKind::Team, EntityKind::Obstacle, EntityKind::Evader]
            .into_iter()
            .map(|kind| {
                let (start, len, mask) = set.category(kind);
                let present = mask.iter().any(|&m| m);
                let mean = if len == 0 {
                    tape.input(Array::zeros(1, self.cfg.latent_dim))
                } else {
                    let rows = tape.slice_rows(set.e, start, len);
                    tape.masked_mean_rows(rows, mask)
                };
                (mean, present)
            })
            .collect()
    }

    /// Representation fed to the action head (1 × head_input_dim).
    pub fn representation(&self, tape: &mut Tape, obs: &ObservationBundle, layout: Layout) -> Var {
        let set = self.embed_observations(tape, obs, layout);
        match self.cfg.variant {
            Variant::Terl => {
                let set = self.add_type_embeddings(tape, &set);
                let m = self.relation_extraction(tape, &set);
                self.target_selection(tape, &m)
            }
            Variant::TerlNoRe => self.target_selection(tape, &set),
            Variant::TerlNoTs => {
                let set = self.add_type_embeddings(tape, &set);
                let m = self.relation_extraction(tape, &set);
                self.ego_and_pool(tape, &m)
            }
            Variant::IqnAvgpool | Variant::DqnAvgpool => {
                let means: Vec<Var> = self.category_means(tape, &set).into_iter().map(|(m, _)| m).collect();
                tape.concat_cols(&means)
            }
            Variant::MeanEmbedding => {
                let present: Vec<Var> = self
                    .category_means(tape, &set)
                    .into_iter()
                    .filter(|&(_, p)| p)
                    .map(|(m, _)| m)
                    .collect();
                tape.mean_of(&present)
            }
        }
    }

    /// `ReLU(Linear([cos(π·i·τ)]_{i<n}))`, one row per τ.
    pub fn quantile_embed(&self, tape: &mut Tape, taus: &[f64]) -> Var {
        let Head::Quantile { tau, .. } = &self.head else {
            panic!("value head has no quantile embedding");
        };
        let n = self.cfg.quantile_embedding;
        let basis = taus
            .iter()
            .flat_map(|&t| (0..n).map(move |i| (PI * i as f64 * t).cos()))
            .collect();
        let x = tape.input(Array::from_rows(taus.len(), n, basis));
        let y = tau.forward(tape, x);
        tape.relu(y)
    }

    /// Quantile values (one row per τ, one column per action); the value
    /// head ignores `taus` and returns a single row.
    pub fn action_quantiles(&self, tape: &mut Tape, rep: Var, taus: &[f64]) -> Var {
        match &self.head {
            Head::Quantile { state, out, .. } => {
                let h = state.forward(tape, rep);
                let h = tape.relu(h);
                let phi = self.quantile_embed(tape, taus);
                let z = tape.mul_row(phi, h);
                out.forward(tape, z)
            }
            Head::Value { state, out } => {
                let h = state.forward(tape, rep);
                let h = tape.relu(h);
                out.forward(tape, h)
            }
        }
    }

    pub fn forward(&self, tape: &mut Tape, obs: &ObservationBundle, taus: &[f64], layout: Layout) -> Var {
        let rep = self.representation(tape, obs, layout);
        self.action_quantiles(tape, rep, taus)
    }
}

/// Column means of a quantile table: the action values.
pub fn mean_q(z: &Array) -> Vec<f64> {
    let k = z.rows() as f64;
    (0..z.cols())
        .map(|c| (0..z.rows()).map(|r| z.get(r, c)).sum::<f64>() / k)
        .collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
