use indexmap::IndexMap;
use rand::Rng;

use crate::{Array, KernelError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug)]
struct Slot {
    value: Array,
    grad: Array,
    m: Array,
    v: Array,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Ordered, named parameter store with gradient slots and Adam moments.
///
/// Values are kept at 32-bit precision after every write made through
/// [`ParamStore::init_uniform`] and [`ParamStore::adam_step`], so a 32-bit
/// checkpoint reproduces them exactly. Arithmetic is always 64-bit.
#[derive(Clone, Debug)]
pub struct ParamStore {
    index: IndexMap<String, usize>,
    slots: Vec<Slot>,
    step: u64,
}

fn round_f32(a: &mut Array) {
    for x in a.data_mut() {
        *x = *x as f32 as f64;
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            index: IndexMap::new(),
            slots: Vec::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: &str, value: Array) -> Result<ParamId, KernelError> {
        if self.index.contains_key(name) {
            return Err(KernelError::DuplicateParam(name.to_string()));
        }
        let (r, c) = (value.rows(), value.cols());
        let id = self.slots.len();
        self.slots.push(Slot {
            value,
            grad: Array::zeros(r, c),
            m: Array::zeros(r, c),
            v: Array::zeros(r, c),
        });
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    /// Uniform(−1/√fan_in, 1/√fan_in) weights, rounded to 32-bit.
    pub fn init_uniform<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<ParamId, KernelError> {
        let bound = 1.0 / (rows.max(1) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        let mut a = Array::from_rows(rows, cols, data);
        round_f32(&mut a);
        self.add(name, a)
    }

    pub fn init_zeros(&mut self, name: &str, rows: usize, cols: usize) -> Result<ParamId, KernelError> {
        self.add(name, Array::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.index.get_index(id.0).unwrap().0
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.slots.len()).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Array {
        &self.slots[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array {
        &mut self.slots[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Array {
        &self.slots[id.0].grad
    }

    pub fn adam_steps(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for s in &mut self.slots {
            s.grad.fill(0.0);
        }
    }

    pub fn set_grads(&mut self, grads: &ParamGrads) {
        for (slot, g) in self.slots.iter_mut().zip(&grads.grads) {
            slot.grad.data_mut().copy_from_slice(g.data());
        }
    }

    /// Scales gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before scaling.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self
            .slots
            .iter()
            .flat_map(|s| s.grad.data())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        if norm > max_norm && norm > 0.0 {
            let k = max_norm / norm;
            for s in &mut self.slots {
                s.grad.data_mut().iter_mut().for_each(|g| *g *= k);
            }
        }
        norm
    }

    /// One Adam update with bias correction using the stored gradients.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for s in &mut self.slots {
            let Slot { value, grad, m, v } = s;
            for i in 0..value.len() {
                let g = grad.data()[i];
                let mi = cfg.beta1 * m.data()[i] + (1.0 - cfg.beta1) * g;
                let vi = cfg.beta2 * v.data()[i] + (1.0 - cfg.beta2) * g * g;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let update = cfg.lr * (mi / c1) / ((vi / c2).sqrt() + cfg.eps);
                let x = value.data()[i] - update;
                value.data_mut()[i] = x as f32 as f64;
            }
        }
    }

    /// Hard copy of all values from `other` (same layout required).
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<(), KernelError> {
        if self.index.len() != other.index.len()
            || self.index.keys().zip(other.index.keys()).any(|(a, b)| a != b)
        {
            return Err(KernelError::Shape("parameter layouts differ".into()));
        }
        for (dst, src) in self.slots.iter_mut().zip(&other.slots) {
            if !dst.value.same_shape(&src.value) {
                return Err(KernelError::Shape("parameter shapes differ".into()));
            }
            dst.value.data_mut().copy_from_slice(src.value.data());
        }
        Ok(())
    }

    pub fn values_equal(&self, other: &ParamStore) -> bool {
        self.slots.len() == other.slots.len()
            && self
                .slots
                .iter()
                .zip(&other.slots)
                .all(|(a, b)| a.value.data() == b.value.data())
    }
}

/// Gradient buffer laid out like a [`ParamStore`], used to accumulate
/// contributions from several tapes before an update.
#[derive(Clone, Debug)]
pub struct ParamGrads {
    grads: Vec<Array>,
}

impl ParamGrads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: store
                .slots
                .iter()
                .map(|s| Array::zeros(s.value.rows(), s.value.cols()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Array {
        &self.grads[id.0]
    }

    pub(crate) fn get_mut(&mut self, id: ParamId) -> &mut Array {
        &mut self.grads[id.0]
    }

    pub fn reset(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }
}
