//! Reverse-mode differentiation over a linear tape of matrix operations.

use std::rc::Rc;

use crate::array::{matmul_at_into, matmul_bt_into, matmul_into};
use crate::ops;
use crate::{Array, ParamGrads, ParamId, ParamStore};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    MulRow(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    MaskedSoftmax(Var),
    MaxPool(Var, Vec<usize>),
    MaskedMeanRows(Var, Rc<[bool]>),
    MeanOf(Vec<Var>),
    SumAll(Var),
    SelectCol(Var, usize),
    QuantileHuber {
        pred: Var,
        targets: Vec<f64>,
        taus: Vec<f64>,
        kappa: f64,
    },
    HuberTd {
        pred: Var,
        targets: Vec<f64>,
        kappa: f64,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Option<Array>,
}

/// A single forward pass. Parameters are read from the borrowed store
/// without copying.
pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::with_capacity(256),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(a), _) => a,
            (None, Op::Param(id)) => self.store.value(*id),
            _ => unreachable!("node without value"),
        }
    }

    fn push(&mut self, op: Op, value: Array) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, a: Array) -> Var {
        self.push(Op::Input, a)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = {
            let (x, y) = (self.value(a), self.value(b));
            let (n, k, m) = (x.rows(), x.cols(), y.cols());
            assert_eq!(k, y.rows(), "matmul inner extents");
            let mut out = Array::zeros(n, m);
            matmul_into(x.data(), y.data(), out.data_mut(), n, k, m);
            out
        };
        self.push(Op::MatMul(a, b), out)
    }

    /// `a · bᵀ`
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let out = {
            let (x, y) = (self.value(a), self.value(b));
            let (n, k, m) = (x.rows(), x.cols(), y.rows());
            assert_eq!(k, y.cols(), "matmul_bt inner extents");
            let mut out = Array::zeros(n, m);
            matmul_bt_into(x.data(), y.data(), out.data_mut(), n, k, m);
            out
        };
        self.push(Op::MatMulBt(a, b), out)
    }

    /// `x + row` with `row` (1×m) broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let out = {
            let (xv, rv) = (self.value(x), self.value(row));
            assert_eq!(rv.rows(), 1, "broadcast operand must be a row");
            assert_eq!(xv.cols(), rv.cols(), "add_row width");
            let mut out = xv.clone();
            for r in 0..out.rows() {
                for (o, b) in out.row_mut(r).iter_mut().zip(rv.data()) {
                    *o += b;
                }
            }
            out
        };
        self.push(Op::AddRow(x, row), out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = {
            let (x, y) = (self.value(a), self.value(b));
            assert!(x.same_shape(y), "add shapes");
            let mut out = x.clone();
            out.add_assign(y);
            out
        };
        self.push(Op::Add(a, b), out)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = {
            let (x, y) = (self.value(a), self.value(b));
            assert!(x.same_shape(y), "mul shapes");
            let mut out = x.clone();
            for (o, v) in out.data_mut().iter_mut().zip(y.data()) {
                *o *= v;
            }
            out
        };
        self.push(Op::Mul(a, b), out)
    }

    /// `x ⊙ row` with `row` broadcast over the rows of `x`.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Var {
        let out = {
            let (xv, rv) = (self.value(x), self.value(row));
            assert_eq!(rv.rows(), 1, "broadcast operand must be a row");
            assert_eq!(xv.cols(), rv.cols(), "mul_row width");
            let mut out = xv.clone();
            for r in 0..out.rows() {
                for (o, b) in out.row_mut(r).iter_mut().zip(rv.data()) {
                    *o *= b;
                }
            }
            out
        };
        self.push(Op::MulRow(x, row), out)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(Op::Relu(x), out)
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let out = self.value(x).map(|v| v * k);
        self.push(Op::Scale(x, k), out)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let out = {
            let n = self.value(parts[0]).rows();
            let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
            let mut out = Array::zeros(n, total);
            let mut offset = 0;
            for &p in parts {
                let a = self.value(p);
                assert_eq!(a.rows(), n, "concat_cols row counts");
                let w = a.cols();
                for r in 0..n {
                    out.row_mut(r)[offset..offset + w].copy_from_slice(a.row(r));
                }
                offset += w;
            }
            out
        };
        self.push(Op::ConcatCols(parts.to_vec()), out)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let out = {
            let m = self.value(parts[0]).cols();
            let mut data = Vec::new();
            let mut rows = 0;
            for &p in parts {
                let a = self.value(p);
                assert_eq!(a.cols(), m, "concat_rows widths");
                data.extend_from_slice(a.data());
                rows += a.rows();
            }
            Array::from_rows(rows, m, data)
        };
        self.push(Op::ConcatRows(parts.to_vec()), out)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let out = {
            let a = self.value(x);
            assert!(start + len <= a.cols(), "slice_cols range");
            let mut out = Array::zeros(a.rows(), len);
            for r in 0..a.rows() {
                out.row_mut(r).copy_from_slice(&a.row(r)[start..start + len]);
            }
            out
        };
        self.push(Op::SliceCols(x, start), out)
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let out = {
            let a = self.value(x);
            assert!(start + len <= a.rows(), "slice_rows range");
            let m = a.cols();
            Array::from_rows(len, m, a.data()[start * m..(start + len) * m].to_vec())
        };
        self.push(Op::SliceRows(x, start), out)
    }

    /// Row-wise softmax over the columns selected by `mask`.
    pub fn masked_softmax(&mut self, x: Var, mask: Rc<[bool]>) -> Var {
        let out = ops::masked_softmax(self.value(x), &mask);
        self.push(Op::MaskedSoftmax(x), out)
    }

    /// Per-feature max over the rows selected by `mask`.
    ///
    /// Panics if no row is valid.
    pub fn masked_max_pool(&mut self, x: Var, mask: &[bool]) -> Var {
        let (out, arg) = ops::masked_max_pool_with_argmax(self.value(x), mask)
            .expect("max-pool requires at least one valid row");
        self.push(Op::MaxPool(x, arg), out)
    }

    /// Mean over rows selected by `mask`; a zero row when none are valid.
    pub fn masked_mean_rows(&mut self, x: Var, mask: Rc<[bool]>) -> Var {
        let out = ops::masked_mean_rows(self.value(x), &mask);
        self.push(Op::MaskedMeanRows(x, mask), out)
    }

    /// Elementwise mean of same-shaped operands.
    pub fn mean_of(&mut self, parts: &[Var]) -> Var {
        let out = {
            let mut out = self.value(parts[0]).clone();
            for &p in &parts[1..] {
                let a = self.value(p);
                assert!(out.same_shape(a), "mean_of shapes");
                out.add_assign(a);
            }
            let k = 1.0 / parts.len() as f64;
            out.data_mut().iter_mut().for_each(|x| *x *= k);
            out
        };
        self.push(Op::MeanOf(parts.to_vec()), out)
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Op::SumAll(x), Array::from_rows(1, 1, vec![s]))
    }

    pub fn select_col(&mut self, x: Var, col: usize) -> Var {
        let out = {
            let a = self.value(x);
            assert!(col < a.cols(), "select_col index");
            Array::from_rows(a.rows(), 1, (0..a.rows()).map(|r| a.get(r, col)).collect())
        };
        self.push(Op::SelectCol(x, col), out)
    }

    /// Quantile Huber loss of a K×1 prediction column against K′ fixed targets.
    pub fn quantile_huber(&mut self, pred: Var, targets: Vec<f64>, taus: Vec<f64>, kappa: f64) -> Var {
        let loss = {
            let p = self.value(pred);
            assert_eq!(p.cols(), 1, "quantile predictions must be a column");
            ops::quantile_huber_loss(p.data(), &targets, &taus, kappa)
        };
        self.push(
            Op::QuantileHuber {
                pred,
                targets,
                taus,
                kappa,
            },
            Array::from_rows(1, 1, vec![loss]),
        )
    }

    /// Mean Huber error of a 1×1 prediction against fixed targets.
    pub fn huber_td(&mut self, pred: Var, targets: Vec<f64>, kappa: f64) -> Var {
        let loss = {
            let p = self.value(pred);
            assert_eq!(p.len(), 1, "huber_td prediction must be a scalar");
            ops::huber_td_loss(p.data()[0], &targets, kappa)
        };
        self.push(
            Op::HuberTd {
                pred,
                targets,
                kappa,
            },
            Array::from_rows(1, 1, vec![loss]),
        )
    }

    /// Back-propagates `seed · ∂out/∂θ` from a scalar node and adds the
    /// parameter gradients into `grads`.
    pub fn backward_into(&self, out: Var, seed: f64, grads: &mut ParamGrads) {
        assert_eq!(self.value(out).len(), 1, "backward from a scalar");
        let mut g: Vec<Option<Array>> = (0..=out.0).map(|_| None).collect();
        g[out.0] = Some(Array::from_rows(1, 1, vec![seed]));

        for i in (0..=out.0).rev() {
            let Some(gi) = g[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(id) => grads.get_mut(*id).add_assign(&gi),
                Op::MatMul(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let (n, k, m) = (x.rows(), x.cols(), y.cols());
                    let mut ga = Array::zeros(n, k);
                    matmul_bt_into(gi.data(), y.data(), ga.data_mut(), n, m, k);
                    let mut gb = Array::zeros(k, m);
                    matmul_at_into(x.data(), gi.data(), gb.data_mut(), n, k, m);
                    accumulate(&mut g, *a, ga);
                    accumulate(&mut g, *b, gb);
                }
                Op::MatMulBt(a, b) => {
                    // out = x·yᵀ: dx = g·y, dy = gᵀ·x
                    let (x, y) = (self.value(*a), self.value(*b));
                    let (n, k, m) = (x.rows(), x.cols(), y.rows());
                    let mut ga = Array::zeros(n, k);
                    matmul_into(gi.data(), y.data(), ga.data_mut(), n, m, k);
                    let mut gb = Array::zeros(m, k);
                    matmul_at_into(gi.data(), x.data(), gb.data_mut(), n, m, k);
                    accumulate(&mut g, *a, ga);
                    accumulate(&mut g, *b, gb);
                }
                Op::AddRow(x, row) => {
                    let m = gi.cols();
                    let mut gr = vec![0.0; m];
                    for r in 0..gi.rows() {
                        for (o, v) in gr.iter_mut().zip(gi.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut g, *row, Array::row_vector(gr));
                    accumulate(&mut g, *x, gi);
                }
                Op::Add(a, b) => {
                    accumulate(&mut g, *b, gi.clone());
                    accumulate(&mut g, *a, gi);
                }
                Op::Mul(a, b) => {
                    let mut ga = gi.clone();
                    for (o, v) in ga.data_mut().iter_mut().zip(self.value(*b).data()) {
                        *o *= v;
                    }
                    let mut gb = gi;
                    for (o, v) in gb.data_mut().iter_mut().zip(self.value(*a).data()) {
                        *o *= v;
                    }
                    accumulate(&mut g, *a, ga);
                    accumulate(&mut g, *b, gb);
                }
                Op::MulRow(x, row) => {
                    let (xv, rv) = (self.value(*x), self.value(*row));
                    let m = xv.cols();
                    let mut gx = gi.clone();
                    let mut gr = vec![0.0; m];
                    for r in 0..xv.rows() {
                        let gx_row = gx.row_mut(r);
                        for j in 0..m {
                            gr[j] += gi.get(r, j) * xv.get(r, j);
                            gx_row[j] *= rv.data()[j];
                        }
                    }
                    accumulate(&mut g, *x, gx);
                    accumulate(&mut g, *row, Array::row_vector(gr));
                }
                Op::Relu(x) => {
                    let mut gx = gi;
                    for (o, y) in gx.data_mut().iter_mut().zip(self.value(Var(i)).data()) {
                        if *y <= 0.0 {
                            *o = 0.0;
                        }
                    }
                    accumulate(&mut g, *x, gx);
                }
                Op::Scale(x, k) => {
                    let k = *k;
                    accumulate(&mut g, *x, gi.map(|v| v * k));
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut gp = Array::zeros(gi.rows(), w);
                        for r in 0..gi.rows() {
                            gp.row_mut(r).copy_from_slice(&gi.row(r)[offset..offset + w]);
                        }
                        offset += w;
                        accumulate(&mut g, p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let m = gi.cols();
                    let mut start = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        let gp = Array::from_rows(
                            rows,
                            m,
                            gi.data()[start * m..(start + rows) * m].to_vec(),
                        );
                        start += rows;
                        accumulate(&mut g, p, gp);
                    }
                }
                Op::SliceCols(x, start) => {
                    let src = self.value(*x);
                    let mut gx = Array::zeros(src.rows(), src.cols());
                    let w = gi.cols();
                    for r in 0..gi.rows() {
                        gx.row_mut(r)[*start..*start + w].copy_from_slice(gi.row(r));
                    }
                    accumulate(&mut g, *x, gx);
                }
                Op::SliceRows(x, start) => {
                    let src = self.value(*x);
                    let m = src.cols();
                    let mut gx = Array::zeros(src.rows(), m);
                    gx.data_mut()[start * m..start * m + gi.len()].copy_from_slice(gi.data());
                    accumulate(&mut g, *x, gx);
                }
                Op::MaskedSoftmax(x) => {
                    let y = self.value(Var(i));
                    let mut gx = Array::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), gi.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (o, (yv, gv)) in gx.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                            *o = yv * (gv - dot);
                        }
                    }
                    accumulate(&mut g, *x, gx);
                }
                Op::MaxPool(x, arg) => {
                    let src = self.value(*x);
                    let mut gx = Array::zeros(src.rows(), src.cols());
                    for (j, &r) in arg.iter().enumerate() {
                        gx.set(r, j, gi.data()[j]);
                    }
                    accumulate(&mut g, *x, gx);
                }
                Op::MaskedMeanRows(x, mask) => {
                    let src = self.value(*x);
                    let count = mask.iter().filter(|&&ok| ok).count();
                    let mut gx = Array::zeros(src.rows(), src.cols());
                    if count > 0 {
                        let k = 1.0 / count as f64;
                        for (r, _) in mask.iter().enumerate().filter(|(_, &ok)| ok) {
                            for (o, v) in gx.row_mut(r).iter_mut().zip(gi.data()) {
                                *o = v * k;
                            }
                        }
                    }
                    accumulate(&mut g, *x, gx);
                }
                Op::MeanOf(parts) => {
                    let k = 1.0 / parts.len() as f64;
                    for &p in parts {
                        accumulate(&mut g, p, gi.map(|v| v * k));
                    }
                }
                Op::SumAll(x) => {
                    let src = self.value(*x);
                    let s = gi.data()[0];
                    accumulate(&mut g, *x, Array::filled(src.rows(), src.cols(), s));
                }
                Op::SelectCol(x, col) => {
                    let src = self.value(*x);
                    let mut gx = Array::zeros(src.rows(), src.cols());
                    for r in 0..src.rows() {
                        gx.set(r, *col, gi.data()[r]);
                    }
                    accumulate(&mut g, *x, gx);
                }
                Op::QuantileHuber {
                    pred,
                    targets,
                    taus,
                    kappa,
                } => {
                    let p = self.value(*pred);
                    let s = gi.data()[0] / targets.len() as f64;
                    let mut gp = Array::zeros(p.rows(), 1);
                    for (k, (&z, &tau)) in p.data().iter().zip(taus).enumerate() {
                        let mut d = 0.0;
                        for &y in targets {
                            let u = y - z;
                            let w = (tau - if u < 0.0 { 1.0 } else { 0.0 }).abs();
                            d -= w * ops::huber_derivative(u, *kappa) / kappa;
                        }
                        gp.data_mut()[k] = d * s;
                    }
                    accumulate(&mut g, *pred, gp);
                }
                Op::HuberTd {
                    pred,
                    targets,
                    kappa,
                } => {
                    let q = self.value(*pred).data()[0];
                    let s = gi.data()[0] / targets.len() as f64;
                    let d: f64 = targets
                        .iter()
                        .map(|&y| -ops::huber_derivative(y - q, *kappa))
                        .sum();
                    let shape = self.value(*pred);
                    accumulate(&mut g, *pred, Array::filled(shape.rows(), shape.cols(), d * s));
                }
            }
        }
    }
}

fn accumulate(g: &mut [Option<Array>], v: Var, delta: Array) {
    match &mut g[v.0] {
        Some(a) => a.add_assign(&delta),
        slot @ None => *slot = Some(delta),
    }
}
