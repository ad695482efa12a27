//! Reverse-mode gradient tape over dense matrices.
//!
//! A [`Tape`] records each primitive in execution order; [`Tape::backward`]
//! replays the records in reverse and accumulates `d(loss)/d(node)` into every
//! node reachable from a gradient-requiring leaf. Accumulation is additive, so
//! a tensor used in several places receives the sum of its contributions.
//!
//! All reductions run sequentially in index order, which makes a replay of the
//! same tape bitwise reproducible.

use super::{shape_error, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

const LAYER_NORM_EPS: f64 = 1e-5;
const RSQRT_GUARD_EPS: f64 = 1e-12;

enum Op {
    Leaf,
    Matmul(TensorId, TensorId),
    /// `a * b^T`
    MatmulNt(TensorId, TensorId),
    Transpose(TensorId),
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Scale(TensorId, f64),
    AddScalar(TensorId),
    ConcatCols(TensorId, TensorId),
    RowMean(TensorId),
    RowSum(TensorId),
    SoftmaxRows(TensorId),
    Relu(TensorId),
    Sigmoid(TensorId),
    LayerNormRows(TensorId),
    Mul(TensorId, TensorId),
    MulRowBroadcast(TensorId, TensorId),
    MulColBroadcast(TensorId, TensorId),
    AddRowBroadcast(TensorId, TensorId),
    RsqrtGuard(TensorId),
    Log(TensorId),
    Square(TensorId),
    Clamp(TensorId, f64, f64),
    GatherRows(TensorId, Vec<usize>),
    ScatterAddRows(TensorId, Vec<usize>),
    MaskedSum(TensorId, Tensor),
    SumAll(TensorId),
    /// Forward takes the hard values stored in the node; backward passes the
    /// upstream gradient through to the soft input unchanged.
    StraightThrough(TensorId),
    ZeroDiagonal(TensorId),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records primitives and runs reverse accumulation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inserts a gradient-requiring leaf (a learnable parameter).
    pub fn leaf(&mut self, value: Tensor) -> TensorId {
        self.push(value, Op::Leaf, true)
    }

    /// Inserts a constant (input data, masks, frozen noise).
    pub fn constant(&mut self, value: Tensor) -> TensorId {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated for `id` by the last [`Tape::backward`] call.
    /// `None` when the node did not require a gradient or none was reached.
    pub fn grad(&self, id: TensorId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> TensorId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn requires(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn binary(&mut self, a: TensorId, b: TensorId, value: Tensor, op: Op) -> TensorId {
        let rg = self.requires(a) || self.requires(b);
        self.push(value, op, rg)
    }

    fn unary(&mut self, a: TensorId, value: Tensor, op: Op) -> TensorId {
        let rg = self.requires(a);
        self.push(value, op, rg)
    }

    // ----- primitives -------------------------------------------------------

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.binary(a, b, v, Op::Matmul(a, b)))
    }

    /// `a * b^T` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let v = self.value(a).matmul_nt(self.value(b))?;
        Ok(self.binary(a, b, v, Op::MatmulNt(a, b)))
    }

    pub fn transpose(&mut self, a: TensorId) -> TensorId {
        let v = self.value(a).transpose();
        self.unary(a, v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.binary(a, b, v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.binary(a, b, v, Op::Sub(a, b)))
    }

    pub fn scale(&mut self, a: TensorId, k: f64) -> TensorId {
        let v = self.value(a).map(|x| k * x);
        self.unary(a, v, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: TensorId, k: f64) -> TensorId {
        let v = self.value(a).map(|x| x + k);
        self.unary(a, v, Op::AddScalar(a))
    }

    pub fn concat_cols(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(shape_error("concat_cols", ta.shape(), tb.shape()));
        }
        let mut v = Tensor::zeros(ta.rows(), ta.cols() + tb.cols());
        for i in 0..ta.rows() {
            let row = v.row_mut(i);
            row[..ta.cols()].copy_from_slice(ta.row(i));
            row[ta.cols()..].copy_from_slice(tb.row(i));
        }
        Ok(self.binary(a, b, v, Op::ConcatCols(a, b)))
    }

    pub fn row_mean(&mut self, a: TensorId) -> TensorId {
        let ta = self.value(a);
        let mut v = Tensor::zeros(ta.rows(), 1);
        for i in 0..ta.rows() {
            let s: f64 = ta.row(i).iter().sum();
            v.set(i, 0, s / ta.cols() as f64);
        }
        self.unary(a, v, Op::RowMean(a))
    }

    pub fn row_sum(&mut self, a: TensorId) -> TensorId {
        let ta = self.value(a);
        let mut v = Tensor::zeros(ta.rows(), 1);
        for i in 0..ta.rows() {
            v.set(i, 0, ta.row(i).iter().sum());
        }
        self.unary(a, v, Op::RowSum(a))
    }

    pub fn softmax_rows(&mut self, a: TensorId) -> TensorId {
        let ta = self.value(a);
        let mut v = Tensor::zeros(ta.rows(), ta.cols());
        for i in 0..ta.rows() {
            let row = ta.row(i);
            let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let mut denom = 0.0;
            for (j, &x) in row.iter().enumerate() {
                let e = (x - max).exp();
                v.set(i, j, e);
                denom += e;
            }
            for j in 0..ta.cols() {
                v.set(i, j, v.get(i, j) / denom);
            }
        }
        self.unary(a, v, Op::SoftmaxRows(a))
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.unary(a, v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: TensorId) -> TensorId {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.unary(a, v, Op::Sigmoid(a))
    }

    /// Row-wise layer normalization without affine parameters,
    /// `(x - mean) / sqrt(var + 1e-5)`.
    pub fn layer_norm_rows(&mut self, a: TensorId) -> TensorId {
        let ta = self.value(a);
        let c = ta.cols() as f64;
        let mut v = Tensor::zeros(ta.rows(), ta.cols());
        for i in 0..ta.rows() {
            let row = ta.row(i);
            let mean = row.iter().sum::<f64>() / c;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / c;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for j in 0..ta.cols() {
                v.set(i, j, (row[j] - mean) * inv);
            }
        }
        self.unary(a, v, Op::LayerNormRows(a))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.binary(a, b, v, Op::Mul(a, b)))
    }

    /// Multiplies every row of `a` elementwise by the `1 x cols` vector `row`.
    pub fn mul_row_broadcast(&mut self, a: TensorId, row: TensorId) -> Result<TensorId> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(shape_error("mul_row_broadcast", ta.shape(), tr.shape()));
        }
        let mut v = ta.clone();
        for i in 0..v.rows() {
            for (x, &w) in v.row_mut(i).iter_mut().zip(tr.row(0)) {
                *x *= w;
            }
        }
        Ok(self.binary(a, row, v, Op::MulRowBroadcast(a, row)))
    }

    /// Multiplies row `i` of `a` by entry `i` of the `rows x 1` vector `col`.
    pub fn mul_col_broadcast(&mut self, a: TensorId, col: TensorId) -> Result<TensorId> {
        let (ta, tc) = (self.value(a), self.value(col));
        if tc.cols() != 1 || tc.rows() != ta.rows() {
            return Err(shape_error("mul_col_broadcast", ta.shape(), tc.shape()));
        }
        let mut v = ta.clone();
        for i in 0..v.rows() {
            let w = tc.get(i, 0);
            for x in v.row_mut(i) {
                *x *= w;
            }
        }
        Ok(self.binary(a, col, v, Op::MulColBroadcast(a, col)))
    }

    /// Adds the `1 x cols` vector `row` to every row of `a` (bias add).
    pub fn add_row_broadcast(&mut self, a: TensorId, row: TensorId) -> Result<TensorId> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(shape_error("add_row_broadcast", ta.shape(), tr.shape()));
        }
        let mut v = ta.clone();
        for i in 0..v.rows() {
            for (x, &w) in v.row_mut(i).iter_mut().zip(tr.row(0)) {
                *x += w;
            }
        }
        Ok(self.binary(a, row, v, Op::AddRowBroadcast(a, row)))
    }

    /// `x^(-1/2)` with a zero guard: entries at or below 1e-12 map to 0.
    /// Used for degree normalization where isolated nodes must stay silent.
    pub fn rsqrt_guard(&mut self, a: TensorId) -> TensorId {
        let v = self.value(a).map(|x| {
            if x <= RSQRT_GUARD_EPS {
                0.0
            } else {
                1.0 / x.sqrt()
            }
        });
        self.unary(a, v, Op::RsqrtGuard(a))
    }

    pub fn log(&mut self, a: TensorId) -> TensorId {
        let v = self.value(a).map(f64::ln);
        self.unary(a, v, Op::Log(a))
    }

    pub fn square(&mut self, a: TensorId) -> TensorId {
        let v = self.value(a).map(|x| x * x);
        self.unary(a, v, Op::Square(a))
    }

    /// Clamps into `[lo, hi]`; gradient passes only strictly inside the band.
    pub fn clamp(&mut self, a: TensorId, lo: f64, hi: f64) -> TensorId {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.unary(a, v, Op::Clamp(a, lo, hi))
    }

    /// Number of entries the clamp actually moved (forward diagnostics).
    pub fn count_outside(&self, a: TensorId, lo: f64, hi: f64) -> usize {
        self.value(a)
            .data()
            .iter()
            .filter(|&&x| x < lo || x > hi)
            .count()
    }

    pub fn gather_rows(&mut self, a: TensorId, indices: &[usize]) -> Result<TensorId> {
        let ta = self.value(a);
        let mut v = Tensor::zeros(indices.len(), ta.cols());
        for (k, &i) in indices.iter().enumerate() {
            if i >= ta.rows() {
                return Err(Error::validation(format!(
                    "gather_rows: index {i} out of range for {} rows",
                    ta.rows()
                )));
            }
            v.row_mut(k).copy_from_slice(ta.row(i));
        }
        Ok(self.unary(a, v, Op::GatherRows(a, indices.to_vec())))
    }

    /// `out[indices[k], :] += a[k, :]` into a zeroed `out_rows x cols` tensor.
    pub fn scatter_add_rows(
        &mut self,
        a: TensorId,
        indices: &[usize],
        out_rows: usize,
    ) -> Result<TensorId> {
        let ta = self.value(a);
        if indices.len() != ta.rows() {
            return Err(Error::validation(format!(
                "scatter_add_rows: {} indices for {} rows",
                indices.len(),
                ta.rows()
            )));
        }
        let mut v = Tensor::zeros(out_rows, ta.cols());
        for (k, &i) in indices.iter().enumerate() {
            if i >= out_rows {
                return Err(Error::validation(format!(
                    "scatter_add_rows: index {i} out of range for {out_rows} rows"
                )));
            }
            for (o, &x) in v.row_mut(i).iter_mut().zip(ta.row(k)) {
                *o += x;
            }
        }
        Ok(self.unary(a, v, Op::ScatterAddRows(a, indices.to_vec())))
    }

    /// Scalar `sum(a .* mask)`; the mask is a plain constant.
    pub fn masked_sum(&mut self, a: TensorId, mask: Tensor) -> Result<TensorId> {
        let ta = self.value(a);
        if ta.shape() != mask.shape() {
            return Err(shape_error("masked_sum", ta.shape(), mask.shape()));
        }
        let s: f64 = ta
            .data()
            .iter()
            .zip(mask.data())
            .map(|(&x, &m)| x * m)
            .sum();
        Ok(self.unary(a, Tensor::scalar(s), Op::MaskedSum(a, mask)))
    }

    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let s = self.value(a).sum();
        self.unary(a, Tensor::scalar(s), Op::SumAll(a))
    }

    /// Straight-through estimator: forward takes `hard`, backward routes the
    /// gradient to `soft` unchanged. Shapes must agree.
    pub fn straight_through(&mut self, soft: TensorId, hard: Tensor) -> Result<TensorId> {
        let ts = self.value(soft);
        if ts.shape() != hard.shape() {
            return Err(shape_error("straight_through", ts.shape(), hard.shape()));
        }
        Ok(self.unary(soft, hard, Op::StraightThrough(soft)))
    }

    /// Zeroes the main diagonal of a square matrix.
    pub fn zero_diagonal(&mut self, a: TensorId) -> Result<TensorId> {
        let ta = self.value(a);
        if ta.rows() != ta.cols() {
            return Err(shape_error("zero_diagonal", ta.shape(), ta.shape()));
        }
        let mut v = ta.clone();
        for i in 0..v.rows() {
            v.set(i, i, 0.0);
        }
        Ok(self.unary(a, v, Op::ZeroDiagonal(a)))
    }

    // ----- reverse pass -----------------------------------------------------

    /// Accumulates `d(loss)/d(node)` for every gradient-requiring node.
    /// `loss` must be a 1x1 tensor.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::validation("backward on an empty tape"));
        }
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.value(loss).shape();
            return Err(Error::validation(format!(
                "backward requires a scalar loss, got {r}x{c}"
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g)?;
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: TensorId, delta: Tensor) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut self.grads[id.0] {
            Some(g) => g.add_scaled(&delta, 1.0),
            slot => *slot = Some(delta),
        }
    }

    fn propagate(&mut self, idx: usize, g: &Tensor) -> Result<()> {
        match &self.nodes[idx].op {
            Op::Leaf => Ok(()),
            Op::Matmul(a, b) => {
                let (a, b) = (*a, *b);
                let da = g.matmul_nt(self.value(b))?;
                let db = self.value(a).transpose().matmul(g)?;
                self.accumulate(a, da);
                self.accumulate(b, db);
                Ok(())
            }
            Op::MatmulNt(a, b) => {
                // c = a b^T: da = g b, db = g^T a
                let (a, b) = (*a, *b);
                let da = g.matmul(self.value(b))?;
                let db = g.transpose().matmul(self.value(a))?;
                self.accumulate(a, da);
                self.accumulate(b, db);
                Ok(())
            }
            Op::Transpose(a) => {
                let a = *a;
                self.accumulate(a, g.transpose());
                Ok(())
            }
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
                Ok(())
            }
            Op::Sub(a, b) => {
                let (a, b) = (*a, *b);
                self.accumulate(a, g.clone());
                self.accumulate(b, g.map(|x| -x));
                Ok(())
            }
            Op::Scale(a, k) => {
                let (a, k) = (*a, *k);
                self.accumulate(a, g.map(|x| k * x));
                Ok(())
            }
            Op::AddScalar(a) => {
                let a = *a;
                self.accumulate(a, g.clone());
                Ok(())
            }
            Op::ConcatCols(a, b) => {
                let (a, b) = (*a, *b);
                let ca = self.value(a).cols();
                let mut da = Tensor::zeros(g.rows(), ca);
                let mut db = Tensor::zeros(g.rows(), g.cols() - ca);
                for i in 0..g.rows() {
                    da.row_mut(i).copy_from_slice(&g.row(i)[..ca]);
                    db.row_mut(i).copy_from_slice(&g.row(i)[ca..]);
                }
                self.accumulate(a, da);
                self.accumulate(b, db);
                Ok(())
            }
            Op::RowMean(a) => {
                let a = *a;
                let cols = self.value(a).cols();
                let mut da = Tensor::zeros(g.rows(), cols);
                for i in 0..g.rows() {
                    let v = g.get(i, 0) / cols as f64;
                    da.row_mut(i).fill(v);
                }
                self.accumulate(a, da);
                Ok(())
            }
            Op::RowSum(a) => {
                let a = *a;
                let cols = self.value(a).cols();
                let mut da = Tensor::zeros(g.rows(), cols);
                for i in 0..g.rows() {
                    da.row_mut(i).fill(g.get(i, 0));
                }
                self.accumulate(a, da);
                Ok(())
            }
            Op::SoftmaxRows(a) => {
                let a = *a;
                let y = &self.nodes[idx].value;
                let mut da = Tensor::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let dot: f64 = g
                        .row(i)
                        .iter()
                        .zip(y.row(i))
                        .map(|(&gi, &yi)| gi * yi)
                        .sum();
                    for j in 0..y.cols() {
                        da.set(i, j, y.get(i, j) * (g.get(i, j) - dot));
                    }
                }
                self.accumulate(a, da);
                Ok(())
            }
            Op::Relu(a) => {
                let a = *a;
                let x = self.value(a);
                let da = x.zip_map(g, |xi, gi| if xi > 0.0 { gi } else { 0.0 })?;
                self.accumulate(a, da);
                Ok(())
            }
            Op::Sigmoid(a) => {
                let a = *a;
                let y = &self.nodes[idx].value;
                let da = y.zip_map(g, |yi, gi| gi * yi * (1.0 - yi))?;
                self.accumulate(a, da);
                Ok(())
            }
            Op::LayerNormRows(a) => {
                let a = *a;
                let x = self.value(a);
                let y = &self.nodes[idx].value;
                let c = x.cols() as f64;
                let mut da = Tensor::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let row = x.row(i);
                    let mean = row.iter().sum::<f64>() / c;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c;
                    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                    let g_mean: f64 = g.row(i).iter().sum::<f64>() / c;
                    let gy_mean: f64 = g
                        .row(i)
                        .iter()
                        .zip(y.row(i))
                        .map(|(&gi, &yi)| gi * yi)
                        .sum::<f64>()
                        / c;
                    for j in 0..x.cols() {
                        da.set(i, j, inv * (g.get(i, j) - g_mean - y.get(i, j) * gy_mean));
                    }
                }
                self.accumulate(a, da);
                Ok(())
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                let da = g.zip_map(self.value(b), |gi, bi| gi * bi)?;
                let db = g.zip_map(self.value(a), |gi, ai| gi * ai)?;
                self.accumulate(a, da);
                self.accumulate(b, db);
                Ok(())
            }
            Op::MulRowBroadcast(a, r) => {
                let (a, r) = (*a, *r);
                let ta = self.value(a).clone();
                let tr = self.value(r);
                let mut da = Tensor::zeros(ta.rows(), ta.cols());
                let mut dr = Tensor::zeros(1, ta.cols());
                for i in 0..ta.rows() {
                    for j in 0..ta.cols() {
                        da.set(i, j, g.get(i, j) * tr.get(0, j));
                        dr.set(0, j, dr.get(0, j) + g.get(i, j) * ta.get(i, j));
                    }
                }
                self.accumulate(a, da);
                self.accumulate(r, dr);
                Ok(())
            }
            Op::MulColBroadcast(a, cid) => {
                let (a, cid) = (*a, *cid);
                let ta = self.value(a).clone();
                let tc = self.value(cid);
                let mut da = Tensor::zeros(ta.rows(), ta.cols());
                let mut dc = Tensor::zeros(ta.rows(), 1);
                for i in 0..ta.rows() {
                    let w = tc.get(i, 0);
                    let mut acc = 0.0;
                    for j in 0..ta.cols() {
                        da.set(i, j, g.get(i, j) * w);
                        acc += g.get(i, j) * ta.get(i, j);
                    }
                    dc.set(i, 0, acc);
                }
                self.accumulate(a, da);
                self.accumulate(cid, dc);
                Ok(())
            }
            Op::AddRowBroadcast(a, r) => {
                let (a, r) = (*a, *r);
                let mut dr = Tensor::zeros(1, g.cols());
                for i in 0..g.rows() {
                    for j in 0..g.cols() {
                        dr.set(0, j, dr.get(0, j) + g.get(i, j));
                    }
                }
                self.accumulate(a, g.clone());
                self.accumulate(r, dr);
                Ok(())
            }
            Op::RsqrtGuard(a) => {
                let a = *a;
                let x = self.value(a);
                let da = x.zip_map(g, |xi, gi| {
                    if xi <= RSQRT_GUARD_EPS {
                        0.0
                    } else {
                        -0.5 * xi.powf(-1.5) * gi
                    }
                })?;
                self.accumulate(a, da);
                Ok(())
            }
            Op::Log(a) => {
                let a = *a;
                let da = self.value(a).zip_map(g, |xi, gi| gi / xi)?;
                self.accumulate(a, da);
                Ok(())
            }
            Op::Square(a) => {
                let a = *a;
                let da = self.value(a).zip_map(g, |xi, gi| 2.0 * xi * gi)?;
                self.accumulate(a, da);
                Ok(())
            }
            Op::Clamp(a, lo, hi) => {
                let (a, lo, hi) = (*a, *lo, *hi);
                let da = self
                    .value(a)
                    .zip_map(g, |xi, gi| if xi > lo && xi < hi { gi } else { 0.0 })?;
                self.accumulate(a, da);
                Ok(())
            }
            Op::GatherRows(a, indices) => {
                let a = *a;
                let indices = indices.clone();
                let rows = self.value(a).rows();
                let mut da = Tensor::zeros(rows, g.cols());
                for (k, &i) in indices.iter().enumerate() {
                    for (o, &x) in da.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += x;
                    }
                }
                self.accumulate(a, da);
                Ok(())
            }
            Op::ScatterAddRows(a, indices) => {
                let a = *a;
                let indices = indices.clone();
                let mut da = Tensor::zeros(indices.len(), g.cols());
                for (k, &i) in indices.iter().enumerate() {
                    da.row_mut(k).copy_from_slice(g.row(i));
                }
                self.accumulate(a, da);
                Ok(())
            }
            Op::MaskedSum(a, mask) => {
                let a = *a;
                let scale = g.item();
                let da = mask.map(|m| m * scale);
                self.accumulate(a, da);
                Ok(())
            }
            Op::SumAll(a) => {
                let a = *a;
                let (r, c) = self.value(a).shape();
                self.accumulate(a, Tensor::filled(r, c, g.item()));
                Ok(())
            }
            Op::StraightThrough(a) => {
                let a = *a;
                self.accumulate(a, g.clone());
                Ok(())
            }
            Op::ZeroDiagonal(a) => {
                let a = *a;
                let mut da = g.clone();
                for i in 0..da.rows() {
                    da.set(i, i, 0.0);
                }
                self.accumulate(a, da);
                Ok(())
            }
        }
    }
}
