//! Reverse-mode tape over row-major matrices.
//!
//! A [`Graph`] is built fresh for every forward pass. Nodes are appended in
//! topological order, so `backward` is a single reverse sweep. Parameters
//! enter the tape through [`Graph::bind`]; trainable bindings receive their
//! gradients back with [`Graph::accumulate_into`].

use crate::error::{Error, Result};
use crate::nn::tensor::{ParameterSet, Tensor};

pub type NodeId = usize;

/// Row-major matrix value held by a node.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Mat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let (r, c) = t.rows_cols();
        Mat::new(r, c, t.data().to_vec())
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn scalar(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }
}

/// `out += A·B` through `dgemm`, with `A` `n×k` and `B` `k×m` given by
/// element strides so transposed operands need no copy.
#[allow(clippy::too_many_arguments)]
fn gemm_acc(
    n: usize,
    k: usize,
    m: usize,
    a: &[f64],
    (ars, acs): (isize, isize),
    b: &[f64],
    (brs, bcs): (isize, isize),
    out: &mut [f64],
) {
    if n == 0 || k == 0 || m == 0 {
        return;
    }
    debug_assert!(out.len() >= n * m);
    // SAFETY: every index reached through the strides lies inside the
    // slices; callers pass shapes that match the slice lengths.
    unsafe {
        matrixmultiply::dgemm(
            n,
            k,
            m,
            1.0,
            a.as_ptr(),
            ars,
            acs,
            b.as_ptr(),
            brs,
            bcs,
            1.0,
            out.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

/// `a (n×k) · b (k×m)` accumulated into `out`.
fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    assert!(a.len() >= n * k && b.len() >= k * m);
    gemm_acc(n, k, m, a, (k as isize, 1), b, (m as isize, 1), out);
}

/// `a (n×k) · bᵀ` where `b` is `m×k`, accumulated into `out`.
fn matmul_bt_acc(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    assert!(a.len() >= n * k && b.len() >= m * k);
    gemm_acc(n, k, m, a, (k as isize, 1), b, (1, k as isize), out);
}

/// `aᵀ · b` where `a` is `n×k` and `b` is `n×m`, accumulated into `out` (k×m).
fn matmul_at_acc(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    assert!(a.len() >= n * k && b.len() >= n * m);
    gemm_acc(k, n, m, a, (1, k as isize), b, (m as isize, 1), out);
}

const LN_EPS: f64 = 1e-9;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    MatMulBt(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    Tanh(NodeId),
    Softmax(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gather {
        table: NodeId,
        indices: Vec<usize>,
    },
    SliceCols {
        a: NodeId,
        start: usize,
    },
    ConcatCols(Vec<NodeId>),
    PowerNorm {
        a: NodeId,
        scale: f64,
        sumsq: f64,
    },
    Mse {
        a: NodeId,
        target: Vec<f64>,
    },
    CrossEntropy {
        logits: NodeId,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
}

struct Node {
    value: Mat,
    op: Op,
    requires_grad: bool,
}

/// Parameters of one [`ParameterSet`] placed on a tape.
#[derive(Clone, Debug)]
pub struct Binding {
    slot: usize,
    trainable: bool,
    ids: Vec<NodeId>,
}

impl Binding {
    pub fn id(&self, idx: usize) -> NodeId {
        self.ids[idx]
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }
}

impl std::ops::Index<usize> for Binding {
    type Output = NodeId;
    fn index(&self, idx: usize) -> &NodeId {
        &self.ids[idx]
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    next_slot: usize,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: NodeId) -> [usize; 2] {
        self.nodes[id].value.shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node created after the first `len`.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        self.grads.clear();
    }

    fn push(&mut self, value: Mat, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.nodes.len() - 1
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    pub fn constant(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf that takes part in differentiation but is not a parameter.
    pub fn variable(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn bind(&mut self, params: &ParameterSet, trainable: bool) -> Binding {
        let ids = params
            .iter()
            .map(|(_, t)| self.push(Mat::from_tensor(t), Op::Leaf, trainable))
            .collect();
        let slot = self.next_slot;
        self.next_slot += 1;
        Binding {
            slot,
            trainable,
            ids,
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        if av.cols != bv.rows {
            return Err(Error::dim("matmul", &av.shape(), &bv.shape()));
        }
        let mut out = Mat::zeros(av.rows, bv.cols);
        matmul_acc(&av.data, &bv.data, &mut out.data, av.rows, av.cols, bv.cols);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        if av.cols != bv.cols {
            return Err(Error::dim("matmul_bt", &av.shape(), &bv.shape()));
        }
        let mut out = Mat::zeros(av.rows, bv.rows);
        matmul_bt_acc(&av.data, &bv.data, &mut out.data, av.rows, av.cols, bv.rows);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMulBt(a, b), rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        if av.shape() != bv.shape() {
            return Err(Error::dim("add", &av.shape(), &bv.shape()));
        }
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x + y).collect();
        let out = Mat::new(av.rows, av.cols, data);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// Adds a `1×C` row to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (av, rv) = (&self.nodes[a].value, &self.nodes[row].value);
        if rv.rows != 1 || rv.cols != av.cols {
            return Err(Error::dim("add_row", &av.shape(), &rv.shape()));
        }
        let mut out = av.clone();
        for r in 0..out.rows {
            for (o, b) in out.data[r * out.cols..(r + 1) * out.cols]
                .iter_mut()
                .zip(&rv.data)
            {
                *o += b;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(out, Op::AddRow(a, row), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        if av.shape() != bv.shape() {
            return Err(Error::dim("mul", &av.shape(), &bv.shape()));
        }
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect();
        let out = Mat::new(av.rows, av.cols, data);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let av = &self.nodes[a].value;
        let out = Mat::new(av.rows, av.cols, av.data.iter().map(|x| x * c).collect());
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let av = &self.nodes[a].value;
        let out = Mat::new(av.rows, av.cols, av.data.iter().map(|x| x.max(0.0)).collect());
        let rg = self.rg(a);
        self.push(out, Op::Relu(a), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let av = &self.nodes[a].value;
        let out = Mat::new(av.rows, av.cols, av.data.iter().map(|x| x.tanh()).collect());
        let rg = self.rg(a);
        self.push(out, Op::Tanh(a), rg)
    }

    /// Row-wise softmax. With `causal`, entry `(i, j)` for `j > i` is masked
    /// to probability zero.
    pub fn softmax(&mut self, a: NodeId, causal: bool) -> NodeId {
        let av = &self.nodes[a].value;
        let mut out = Mat::zeros(av.rows, av.cols);
        for r in 0..av.rows {
            let limit = if causal { (r + 1).min(av.cols) } else { av.cols };
            let row = &av.data[r * av.cols..r * av.cols + limit];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let orow = &mut out.data[r * av.cols..r * av.cols + limit];
            let mut sum = 0.0;
            for (o, x) in orow.iter_mut().zip(row) {
                *o = (x - max).exp();
                sum += *o;
            }
            orow.iter_mut().for_each(|o| *o /= sum);
        }
        let rg = self.rg(a);
        self.push(out, Op::Softmax(a), rg)
    }

    /// Row-wise layer normalisation followed by an affine `gain`, `bias`
    /// (both `1×C`).
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId> {
        let xv = &self.nodes[x].value;
        let (gv, bv) = (&self.nodes[gain].value, &self.nodes[bias].value);
        if gv.data.len() != xv.cols || bv.data.len() != xv.cols {
            return Err(Error::dim("layer_norm", &xv.shape(), &gv.shape()));
        }
        let c = xv.cols;
        let mut xhat = vec![0.0; xv.data.len()];
        let mut inv_std = vec![0.0; xv.rows];
        let mut out = Mat::zeros(xv.rows, c);
        for r in 0..xv.rows {
            let row = &xv.data[r * c..(r + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std[r] = is;
            for j in 0..c {
                let xh = (row[j] - mean) * is;
                xhat[r * c + j] = xh;
                out.data[r * c + j] = xh * gv.data[j] + bv.data[j];
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Selects rows of `table` by index.
    pub fn gather(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let tv = &self.nodes[table].value;
        let mut out = Mat::zeros(indices.len(), tv.cols);
        for (r, &i) in indices.iter().enumerate() {
            if i >= tv.rows {
                return Err(Error::Vocabulary(format!(
                    "index {i} out of range for table with {} rows",
                    tv.rows
                )));
            }
            out.data[r * tv.cols..(r + 1) * tv.cols].copy_from_slice(tv.row(i));
        }
        let rg = self.rg(table);
        Ok(self.push(
            out,
            Op::Gather {
                table,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let av = &self.nodes[a].value;
        if start >= end || end > av.cols {
            return Err(Error::dim("slice_cols", &av.shape(), &[start, end]));
        }
        let w = end - start;
        let mut out = Mat::zeros(av.rows, w);
        for r in 0..av.rows {
            out.data[r * w..(r + 1) * w]
                .copy_from_slice(&av.data[r * av.cols + start..r * av.cols + end]);
        }
        let rg = self.rg(a);
        Ok(self.push(out, Op::SliceCols { a, start }, rg))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let rows = self.nodes[parts[0]].value.rows;
        if let Some(&bad) = parts.iter().find(|&&p| self.nodes[p].value.rows != rows) {
            return Err(Error::dim(
                "concat_cols",
                &self.shape(parts[0]),
                &self.shape(bad),
            ));
        }
        let cols: usize = parts.iter().map(|&p| self.nodes[p].value.cols).sum();
        let mut out = Mat::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let pv = &self.nodes[p].value;
                out.data[r * cols + off..r * cols + off + pv.cols].copy_from_slice(pv.row(r));
                off += pv.cols;
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Scales the whole matrix so that, read as `len/2` complex symbols
    /// (consecutive real pairs), the mean symbol energy equals `power`.
    pub fn power_normalize(&mut self, a: NodeId, power: f64) -> Result<NodeId> {
        let av = &self.nodes[a].value;
        let sumsq: f64 = av.data.iter().map(|v| v * v).sum();
        if sumsq == 0.0 {
            return Err(Error::DegenerateBlock);
        }
        let n_sym = av.data.len() as f64 / 2.0;
        let scale = (power * n_sym / sumsq).sqrt();
        let out = Mat::new(av.rows, av.cols, av.data.iter().map(|v| v * scale).collect());
        let rg = self.rg(a);
        Ok(self.push(out, Op::PowerNorm { a, scale, sumsq }, rg))
    }

    /// Mean squared error against a constant target; yields a `1×1` node.
    pub fn mse(&mut self, a: NodeId, target: &Mat) -> Result<NodeId> {
        let av = &self.nodes[a].value;
        if av.shape() != target.shape() {
            return Err(Error::dim("mse", &av.shape(), &target.shape()));
        }
        let n = av.data.len() as f64;
        let loss = av
            .data
            .iter()
            .zip(&target.data)
            .map(|(x, t)| (x - t) * (x - t))
            .sum::<f64>()
            / n;
        let rg = self.rg(a);
        Ok(self.push(
            Mat::new(1, 1, vec![loss]),
            Op::Mse {
                a,
                target: target.data.clone(),
            },
            rg,
        ))
    }

    /// Softmax cross-entropy averaged over rows; yields a `1×1` node.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let lv = &self.nodes[logits].value;
        if lv.rows != targets.len() {
            return Err(Error::dim("cross_entropy", &lv.shape(), &[targets.len()]));
        }
        let v = lv.cols;
        let mut probs = vec![0.0; lv.data.len()];
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            if t >= v {
                return Err(Error::Vocabulary(format!("target {t} out of range {v}")));
            }
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            for j in 0..v {
                probs[r * v + j] = (row[j] - lse).exp();
            }
            loss += lse - row[t];
        }
        loss /= targets.len() as f64;
        let rg = self.rg(logits);
        Ok(self.push(
            Mat::new(1, 1, vec![loss]),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar node. Clears any previous gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss].value.data.len() != 1 {
            return Err(Error::dim("backward", &self.shape(loss), &[1, 1]));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss] = Some(vec![1.0]);
        for id in (0..=loss).rev() {
            let Some(g) = self.grads[id].take() else {
                continue;
            };
            if self.nodes[id].requires_grad {
                self.propagate(id, &g);
            }
            self.grads[id] = Some(g);
        }
        Ok(())
    }

    fn acc(&mut self, id: NodeId, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[id].requires_grad {
            return;
        }
        let n = self.nodes[id].value.data.len();
        let slot = self.grads[id].get_or_insert_with(|| vec![0.0; n]);
        f(slot);
    }

    fn propagate(&mut self, id: NodeId, g: &[f64]) {
        // Take the op out temporarily so its cached state can be read while
        // gradients of other nodes are mutated.
        let op = std::mem::replace(&mut self.nodes[id].op, Op::Leaf);
        let out_shape = self.nodes[id].value.shape();
        match &op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let [n, k] = self.shape(a);
                let m = out_shape[1];
                let bv = self.nodes[b].value.data.clone();
                self.acc(a, |ga| matmul_bt_acc(g, &bv, ga, n, m, k));
                let av = self.nodes[a].value.data.clone();
                self.acc(b, |gb| matmul_at_acc(&av, g, gb, n, k, m));
            }
            &Op::MatMulBt(a, b) => {
                let [n, k] = self.shape(a);
                let m = out_shape[1];
                let bv = self.nodes[b].value.data.clone();
                self.acc(a, |ga| matmul_acc(g, &bv, ga, n, m, k));
                let av = self.nodes[a].value.data.clone();
                self.acc(b, |gb| matmul_at_acc(g, &av, gb, n, m, k));
            }
            &Op::Add(a, b) => {
                self.acc(a, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                self.acc(b, |gb| gb.iter_mut().zip(g).for_each(|(x, y)| *x += y));
            }
            &Op::AddRow(a, row) => {
                let cols = out_shape[1];
                self.acc(a, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                self.acc(row, |gr| {
                    for chunk in g.chunks(cols) {
                        gr.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
                    }
                });
            }
            &Op::Mul(a, b) => {
                let bv = self.nodes[b].value.data.clone();
                let av = self.nodes[a].value.data.clone();
                self.acc(a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * bv[i];
                    }
                });
                self.acc(b, |gb| {
                    for i in 0..gb.len() {
                        gb[i] += g[i] * av[i];
                    }
                });
            }
            &Op::Scale(a, c) => {
                self.acc(a, |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += c * y));
            }
            &Op::Relu(a) => {
                let out = self.nodes[id].value.data.clone();
                self.acc(a, |ga| {
                    for i in 0..ga.len() {
                        if out[i] > 0.0 {
                            ga[i] += g[i];
                        }
                    }
                });
            }
            &Op::Tanh(a) => {
                let out = self.nodes[id].value.data.clone();
                self.acc(a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * (1.0 - out[i] * out[i]);
                    }
                });
            }
            &Op::Softmax(a) => {
                let out = self.nodes[id].value.data.clone();
                let cols = out_shape[1];
                self.acc(a, |ga| {
                    for r in 0..out_shape[0] {
                        let s = &out[r * cols..(r + 1) * cols];
                        let gr = &g[r * cols..(r + 1) * cols];
                        let dot: f64 = s.iter().zip(gr).map(|(x, y)| x * y).sum();
                        for j in 0..cols {
                            ga[r * cols + j] += s[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let (x, gain, bias) = (*x, *gain, *bias);
                let [rows, cols] = out_shape;
                let gv = self.nodes[gain].value.data.clone();
                self.acc(x, |gx| {
                    for r in 0..rows {
                        let xh = &xhat[r * cols..(r + 1) * cols];
                        let gr = &g[r * cols..(r + 1) * cols];
                        let dxh: Vec<f64> = gr.iter().zip(&gv).map(|(a, b)| a * b).collect();
                        let mean_d = dxh.iter().sum::<f64>() / cols as f64;
                        let mean_dx =
                            dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / cols as f64;
                        for j in 0..cols {
                            gx[r * cols + j] += inv_std[r] * (dxh[j] - mean_d - xh[j] * mean_dx);
                        }
                    }
                });
                self.acc(gain, |gg| {
                    for r in 0..rows {
                        for j in 0..cols {
                            gg[j] += g[r * cols + j] * xhat[r * cols + j];
                        }
                    }
                });
                self.acc(bias, |gb| {
                    for chunk in g.chunks(cols) {
                        gb.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Gather { table, indices } => {
                let cols = out_shape[1];
                self.acc(*table, |gt| {
                    for (r, &i) in indices.iter().enumerate() {
                        for j in 0..cols {
                            gt[i * cols + j] += g[r * cols + j];
                        }
                    }
                });
            }
            &Op::SliceCols { a, start } => {
                let src_cols = self.shape(a)[1];
                let w = out_shape[1];
                self.acc(a, |ga| {
                    for r in 0..out_shape[0] {
                        for j in 0..w {
                            ga[r * src_cols + start + j] += g[r * w + j];
                        }
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let cols = out_shape[1];
                let mut off = 0;
                for &p in parts {
                    let pc = self.shape(p)[1];
                    self.acc(p, |gp| {
                        for r in 0..out_shape[0] {
                            for j in 0..pc {
                                gp[r * pc + j] += g[r * cols + off + j];
                            }
                        }
                    });
                    off += pc;
                }
            }
            &Op::PowerNorm { a, scale, sumsq } => {
                let av = self.nodes[a].value.data.clone();
                let dot: f64 = av.iter().zip(g).map(|(x, y)| x * y).sum();
                self.acc(a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += scale * (g[i] - dot * av[i] / sumsq);
                    }
                });
            }
            Op::Mse { a, target } => {
                let av = self.nodes[*a].value.data.clone();
                let n = av.len() as f64;
                let g0 = g[0];
                self.acc(*a, |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g0 * 2.0 * (av[i] - target[i]) / n;
                    }
                });
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let v = self.shape(*logits)[1];
                let m = targets.len() as f64;
                let g0 = g[0];
                self.acc(*logits, |gl| {
                    for (r, &t) in targets.iter().enumerate() {
                        for j in 0..v {
                            let p = if j == t { 1.0 } else { 0.0 };
                            gl[r * v + j] += g0 * (probs[r * v + j] - p) / m;
                        }
                    }
                });
            }
        }
        self.nodes[id].op = op;
    }

    /// Gradient of the last `backward` loss with respect to `id`.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id).and_then(|g| g.as_deref())
    }

    /// Adds the gradients of a trainable binding into the matching
    /// parameter tensors.
    pub fn accumulate_into(&self, binding: &Binding, params: &mut ParameterSet) -> Result<()> {
        if !binding.trainable {
            return Err(Error::Contract(format!(
                "binding slot {} is frozen; refusing to write gradients into {}",
                binding.slot,
                params.role().name()
            )));
        }
        if binding.ids.len() != params.len() {
            return Err(Error::dim(
                "accumulate_into",
                &[binding.ids.len()],
                &[params.len()],
            ));
        }
        for (i, &id) in binding.ids.iter().enumerate() {
            let t = params.get_mut(i);
            match self.grad(id) {
                Some(g) => t.accumulate_grad(g),
                None => {
                    if t.grad().is_none() {
                        t.zero_grad();
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(build: impl Fn(&mut Graph, NodeId) -> NodeId, x0: Mat) {
        let mut g = Graph::new();
        let x = g.variable(x0.clone());
        let out = build(&mut g, x);
        g.backward(out).unwrap();
        let analytic = g.grad(x).unwrap().to_vec();
        let h = 1e-5;
        for (i, &a) in analytic.iter().enumerate() {
            let eval = |delta: f64| {
                let mut xm = x0.clone();
                xm.data[i] += delta;
                let mut g = Graph::new();
                let x = g.variable(xm);
                let out = build(&mut g, x);
                g.value(out).scalar()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let denom = fd.abs().max(a.abs()).max(1e-8);
            assert!(
                (fd - a).abs() / denom < 1e-5 || (fd - a).abs() < 1e-8,
                "entry {i}: fd {fd} vs analytic {}",
                analytic[i]
            );
        }
    }

    fn probe(g: &mut Graph, y: NodeId) -> NodeId {
        let [r, c] = g.shape(y);
        let w: Vec<f64> = (0..r * c).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
        let wn = g.constant(Mat::new(r, c, w));
        let p = g.mul(y, wn).unwrap();
        let target = Mat::zeros(r, c);
        g.mse(p, &target).unwrap()
    }

    fn sample(r: usize, c: usize, seed: u64) -> Mat {
        let data = (0..r * c)
            .map(|i| (((i as u64 + 1) * 2654435761 + seed * 97) % 1000) as f64 / 500.0 - 1.0)
            .collect();
        Mat::new(r, c, data)
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new();
        let x = g.constant(sample(4, 5, 1));
        for causal in [false, true] {
            let s = g.softmax(x, causal);
            for r in 0..4 {
                let sum: f64 = g.value(s).row(r).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn causal_softmax_masks_future() {
        let mut g = Graph::new();
        let x = g.constant(sample(3, 3, 2));
        let s = g.softmax(x, true);
        let v = g.value(s);
        assert_eq!(v.row(0)[1], 0.0);
        assert_eq!(v.row(0)[2], 0.0);
        assert_eq!(v.row(1)[2], 0.0);
    }

    #[test]
    fn elementwise_ops_match_finite_differences() {
        fd_check(
            |g, x| {
                let t = g.tanh(x);
                probe(g, t)
            },
            sample(3, 4, 3),
        );
        fd_check(
            |g, x| {
                let s = g.softmax(x, true);
                probe(g, s)
            },
            sample(3, 3, 4),
        );
        fd_check(
            |g, x| {
                let s = g.softmax(x, false);
                probe(g, s)
            },
            sample(2, 5, 5),
        );
        fd_check(|g, x| g.power_normalize(x, 2.0).map(|p| probe(g, p)).unwrap(), sample(2, 4, 6));
    }

    #[test]
    fn structural_ops_match_finite_differences() {
        fd_check(
            |g, x| {
                let w = g.constant(sample(4, 3, 7));
                let y = g.matmul(x, w).unwrap();
                probe(g, y)
            },
            sample(2, 4, 8),
        );
        fd_check(
            |g, x| {
                let k = g.constant(sample(5, 4, 9));
                let y = g.matmul_bt(x, k).unwrap();
                let z = g.matmul_bt(k, x).unwrap();
                let a = probe(g, y);
                let b = probe(g, z);
                g.add(a, b).unwrap()
            },
            sample(3, 4, 10),
        );
        fd_check(
            |g, x| {
                let gain = g.constant(sample(1, 5, 11));
                let bias = g.constant(sample(1, 5, 12));
                let y = g.layer_norm(x, gain, bias).unwrap();
                probe(g, y)
            },
            sample(3, 5, 13),
        );
        fd_check(
            |g, x| {
                let a = g.slice_cols(x, 0, 2).unwrap();
                let b = g.slice_cols(x, 2, 5).unwrap();
                let c = g.concat_cols(&[b, a]).unwrap();
                let e = g.gather(c, &[2, 0, 2]).unwrap();
                probe(g, e)
            },
            sample(3, 5, 14),
        );
        fd_check(|g, x| g.cross_entropy(x, &[1, 0, 3]).unwrap(), sample(3, 4, 15));
    }

    #[test]
    fn frozen_binding_refuses_gradient_writes() {
        let mut ps = ParameterSet::new(crate::nn::Role::AutoEncoder);
        ps.insert("w", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let mut g = Graph::new();
        let b = g.bind(&ps, false);
        let l = g.mse(b[0], &Mat::zeros(1, 2)).unwrap();
        g.backward(l).unwrap();
        assert!(g.grad(b[0]).is_none());
        assert!(g.accumulate_into(&b, &mut ps).is_err());
    }
}
