use std::rc::Rc;

use rand::Rng;

use crate::{KernelError, ParamId, ParamStore, Tape, Var};

/// Affine layer `x·W + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Result<Self, KernelError> {
        let weight = store.init_uniform(&format!("{name}.weight"), inputs, outputs, rng)?;
        let bias = store.init_zeros(&format!("{name}.bias"), 1, outputs)?;
        Ok(Self {
            weight,
            bias,
            inputs,
            outputs,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let xw = tape.matmul(x, w);
        tape.add_row(xw, b)
    }
}

/// Stack of [`Linear`] layers with ReLU between them; the last layer is linear.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `widths` lists every layer boundary, e.g. `[7, 64, 64]` is two layers.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        rng: &mut R,
    ) -> Result<Self, KernelError> {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect::<Result<_, _>>()?;
        Ok(Self { layers })
    }

    pub fn forward(&self, tape: &mut Tape, mut x: Var) -> Var {
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, x);
            if i + 1 < self.layers.len() {
                x = tape.relu(x);
            }
        }
        x
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }
}

/// Multi-head scaled dot-product attention with input and output projections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self, KernelError> {
        if heads == 0 || dim % heads != 0 {
            return Err(KernelError::Shape(format!(
                "feature dim {dim} not divisible by {heads} heads"
            )));
        }
        Ok(Self {
            query: Linear::new(store, &format!("{name}.q"), dim, dim, rng)?,
            key: Linear::new(store, &format!("{name}.k"), dim, dim, rng)?,
            value: Linear::new(store, &format!("{name}.v"), dim, dim, rng)?,
            output: Linear::new(store, &format!("{name}.o"), dim, dim, rng)?,
            heads,
            dim,
        })
    }

    /// Attends every row of `queries` over the rows of `keys_values` whose
    /// `key_mask` entry is true. Rows with no valid key produce a zero context
    /// before the output projection.
    pub fn forward(&self, tape: &mut Tape, queries: Var, keys_values: Var, key_mask: Rc<[bool]>) -> Var {
        let q = self.query.forward(tape, queries);
        let k = self.key.forward(tape, keys_values);
        let v = self.value.forward(tape, keys_values);
        let context = attend(tape, q, k, v, key_mask, self.heads);
        self.output.forward(tape, context)
    }
}

/// Splits projected `q`, `k`, `v` into `heads` column groups and concatenates
/// `softmax(q·kᵀ/√d_k)·v` per head.
pub fn attend(tape: &mut Tape, q: Var, k: Var, v: Var, key_mask: Rc<[bool]>, heads: usize) -> Var {
    let dim = tape.value(q).cols();
    let d_k = dim / heads;
    let scale = 1.0 / (d_k as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (qh, kh, vh) = if heads == 1 {
            (q, k, v)
        } else {
            (
                tape.slice_cols(q, h * d_k, d_k),
                tape.slice_cols(k, h * d_k, d_k),
                tape.slice_cols(v, h * d_k, d_k),
            )
        };
        let scores = tape.matmul_bt(qh, kh);
        let scores = tape.scale(scores, scale);
        let weights = tape.masked_softmax(scores, key_mask.clone());
        outs.push(tape.matmul(weights, vh));
    }
    if heads == 1 {
        outs[0]
    } else {
        tape.concat_cols(&outs)
    }
}
