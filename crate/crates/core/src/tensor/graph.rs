//! Tape-based computation graph.
//!
//! Every operation appends a node to the tape, so node ids are already in
//! topological order and `backward` is a single reverse sweep. Gradients
//! accumulate: a node used twice receives the sum of both contributions.

use std::collections::HashMap;

use super::params::{ParamId, ParamStore};
use super::{Tensor, TensorError, CROSS_ENTROPY_EPS};

pub type NodeId = usize;

enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Concat { inputs: Vec<NodeId>, axis: usize },
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softmax(NodeId),
    SumAxis { input: NodeId, axis: usize },
    MaxAxis { input: NodeId, axis: usize, argmax: Vec<usize> },
    SumAll(NodeId),
    Lookup { table: NodeId, indices: Vec<usize> },
    Unfold { input: NodeId, window: usize },
    Reshape(NodeId),
    CrossEntropy { pred: NodeId, gold: Vec<usize> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    param: Option<ParamId>,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    bound: HashMap<ParamId, NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    /// Gradient of the last `backward` loss w.r.t. node `id`, if it was reached.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id).and_then(|g| g.as_deref())
    }

    /// Leaf that does not participate in differentiation.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false, None)
    }

    /// Leaf tracked for gradients (used by gradient checking and tests).
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true, None)
    }

    /// Bind a stored parameter into this graph. Binding the same parameter
    /// twice returns the same node so its gradient accumulates across uses.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.bound.get(&id) {
            return node;
        }
        let node = self.push(store.value(id).clone(), Op::Leaf, true, Some(id));
        self.bound.insert(id, node);
        node
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, param: Option<ParamId>) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            param,
        });
        self.nodes.len() - 1
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    fn shape(&self, id: NodeId) -> Vec<usize> {
        self.nodes[id].value.shape().to_vec()
    }

    // ── forward ops ─────────────────────────────────────────────────────

    /// Matrix product. Supports (m,k)x(k,n), (m,k)x(k) and (k)x(k,n).
    pub fn matmul(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, TensorError> {
        let (ls, rs) = (self.shape(lhs), self.shape(rhs));
        let a = self.nodes[lhs].value.data();
        let b = self.nodes[rhs].value.data();
        let value = match (ls.as_slice(), rs.as_slice()) {
            ([m, k], [k2, n]) if k == k2 => {
                let (m, k, n) = (*m, *k, *n);
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for p in 0..k {
                        let av = a[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            out[i * n + j] += av * b[p * n + j];
                        }
                    }
                }
                Tensor::new(vec![m, n], out)?
            }
            ([m, k], [k2]) if k == k2 => {
                let (m, k) = (*m, *k);
                let mut out = vec![0.0; m];
                for i in 0..m {
                    let mut s = 0.0;
                    for p in 0..k {
                        s += a[i * k + p] * b[p];
                    }
                    out[i] = s;
                }
                Tensor::vector(out)
            }
            ([k], [k2, n]) if k == k2 => {
                let (k, n) = (*k, *n);
                let mut out = vec![0.0; n];
                for p in 0..k {
                    let av = a[p];
                    if av == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        out[j] += av * b[p * n + j];
                    }
                }
                Tensor::vector(out)
            }
            _ => {
                return Err(TensorError::ShapeMismatch {
                    op: "matmul",
                    lhs: ls,
                    rhs: rs,
                })
            }
        };
        let rg = self.needs(&[lhs, rhs]);
        Ok(self.push(value, Op::MatMul(lhs, rhs), rg, None))
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, TensorError> {
        let (ls, rs) = (self.shape(lhs), self.shape(rhs));
        if ls != rs {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                lhs: ls,
                rhs: rs,
            });
        }
        let data = self.zip(lhs, rhs, |a, b| a + b);
        let value = Tensor::new(ls, data)?;
        let rg = self.needs(&[lhs, rhs]);
        Ok(self.push(value, Op::Add(lhs, rhs), rg, None))
    }

    /// Broadcast-add a row vector over every row of a 2-D tensor.
    pub fn add_row(&mut self, lhs: NodeId, row: NodeId) -> Result<NodeId, TensorError> {
        let (ls, rs) = (self.shape(lhs), self.shape(row));
        if ls.len() != 2 || rs.len() != 1 || ls[1] != rs[0] {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                lhs: ls,
                rhs: rs,
            });
        }
        let (m, n) = (ls[0], ls[1]);
        let a = self.nodes[lhs].value.data();
        let b = self.nodes[row].value.data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = a[i * n + j] + b[j];
            }
        }
        let value = Tensor::new(ls, out)?;
        let rg = self.needs(&[lhs, row]);
        Ok(self.push(value, Op::AddRow(lhs, row), rg, None))
    }

    pub fn sub(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, TensorError> {
        let (ls, rs) = (self.shape(lhs), self.shape(rhs));
        if ls != rs {
            return Err(TensorError::ShapeMismatch {
                op: "sub",
                lhs: ls,
                rhs: rs,
            });
        }
        let data = self.zip(lhs, rhs, |a, b| a - b);
        let value = Tensor::new(ls, data)?;
        let rg = self.needs(&[lhs, rhs]);
        Ok(self.push(value, Op::Sub(lhs, rhs), rg, None))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, TensorError> {
        let (ls, rs) = (self.shape(lhs), self.shape(rhs));
        if ls != rs {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                lhs: ls,
                rhs: rs,
            });
        }
        let data = self.zip(lhs, rhs, |a, b| a * b);
        let value = Tensor::new(ls, data)?;
        let rg = self.needs(&[lhs, rhs]);
        Ok(self.push(value, Op::Mul(lhs, rhs), rg, None))
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> NodeId {
        let value = Tensor::new(
            self.shape(input),
            self.nodes[input].value.data().iter().map(|v| v * factor).collect(),
        )
        .expect("scale preserves shape");
        let rg = self.needs(&[input]);
        self.push(value, Op::Scale(input, factor), rg, None)
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        self.unary(input, |x| x.max(0.0), Op::Relu(input))
    }

    pub fn sigmoid(&mut self, input: NodeId) -> NodeId {
        self.unary(input, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(input))
    }

    pub fn tanh(&mut self, input: NodeId) -> NodeId {
        self.unary(input, f64::tanh, Op::Tanh(input))
    }

    /// Softmax over the last axis (whole vector for 1-D, per row for 2-D).
    pub fn softmax(&mut self, input: NodeId) -> Result<NodeId, TensorError> {
        let shape = self.shape(input);
        let (rows, cols) = match shape.as_slice() {
            [n] => (1, *n),
            [m, n] => (*m, *n),
            _ => {
                return Err(TensorError::BadShape {
                    op: "softmax",
                    expected: "1-D or 2-D tensor",
                    got: shape,
                })
            }
        };
        let x = self.nodes[input].value.data();
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &x[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                out[r * cols + j] = e;
                sum += e;
            }
            for j in 0..cols {
                out[r * cols + j] /= sum;
            }
        }
        let value = Tensor::new(shape, out)?;
        let rg = self.needs(&[input]);
        Ok(self.push(value, Op::Softmax(input), rg, None))
    }

    /// Reduce a 2-D tensor along `axis` (0 sums rows away, 1 sums columns away).
    pub fn sum_axis(&mut self, input: NodeId, axis: usize) -> Result<NodeId, TensorError> {
        let shape = self.shape(input);
        if shape.len() != 2 || axis > 1 {
            return Err(TensorError::BadShape {
                op: "sum_axis",
                expected: "2-D tensor with axis 0 or 1",
                got: shape,
            });
        }
        let (m, n) = (shape[0], shape[1]);
        let x = self.nodes[input].value.data();
        let value = if axis == 0 {
            let mut out = vec![0.0; n];
            for i in 0..m {
                for j in 0..n {
                    out[j] += x[i * n + j];
                }
            }
            Tensor::vector(out)
        } else {
            let mut out = vec![0.0; m];
            for i in 0..m {
                for j in 0..n {
                    out[i] += x[i * n + j];
                }
            }
            Tensor::vector(out)
        };
        let rg = self.needs(&[input]);
        Ok(self.push(value, Op::SumAxis { input, axis }, rg, None))
    }

    /// Max-reduce a 2-D tensor along `axis`. Ties route the gradient to the
    /// first maximal element, which keeps backward deterministic.
    pub fn max_axis(&mut self, input: NodeId, axis: usize) -> Result<NodeId, TensorError> {
        let shape = self.shape(input);
        if shape.len() != 2 || axis > 1 {
            return Err(TensorError::BadShape {
                op: "max_axis",
                expected: "2-D tensor with axis 0 or 1",
                got: shape,
            });
        }
        let (m, n) = (shape[0], shape[1]);
        let x = self.nodes[input].value.data();
        let (out, argmax) = if axis == 0 {
            let mut out = vec![f64::NEG_INFINITY; n];
            let mut arg = vec![0usize; n];
            for i in 0..m {
                for j in 0..n {
                    if x[i * n + j] > out[j] {
                        out[j] = x[i * n + j];
                        arg[j] = i;
                    }
                }
            }
            (out, arg)
        } else {
            let mut out = vec![f64::NEG_INFINITY; m];
            let mut arg = vec![0usize; m];
            for i in 0..m {
                for j in 0..n {
                    if x[i * n + j] > out[i] {
                        out[i] = x[i * n + j];
                        arg[i] = j;
                    }
                }
            }
            (out, arg)
        };
        let rg = self.needs(&[input]);
        Ok(self.push(
            Tensor::vector(out),
            Op::MaxAxis { input, axis, argmax },
            rg,
            None,
        ))
    }

    /// Sum of every element, as a scalar.
    pub fn sum_all(&mut self, input: NodeId) -> NodeId {
        let total: f64 = self.nodes[input].value.data().iter().sum();
        let rg = self.needs(&[input]);
        self.push(Tensor::scalar(total), Op::SumAll(input), rg, None)
    }

    /// Concatenate 1-D tensors (axis 0) or 2-D tensors (axis 0 stacks rows,
    /// axis 1 appends columns).
    pub fn concat(&mut self, axis: usize, inputs: &[NodeId]) -> Result<NodeId, TensorError> {
        if inputs.is_empty() {
            return Err(TensorError::BadShape {
                op: "concat",
                expected: "at least one input",
                got: vec![],
            });
        }
        let first = self.shape(inputs[0]);
        let rank = first.len();
        if rank == 0 || rank > 2 || axis >= rank {
            return Err(TensorError::BadShape {
                op: "concat",
                expected: "1-D or 2-D inputs with a valid axis",
                got: first,
            });
        }
        for &id in &inputs[1..] {
            let s = self.shape(id);
            let compatible = s.len() == rank && (rank == 1 || s[1 - axis] == first[1 - axis]);
            if !compatible {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: first,
                    rhs: s,
                });
            }
        }
        let value = if rank == 1 {
            let mut data = Vec::new();
            for &id in inputs {
                data.extend_from_slice(self.nodes[id].value.data());
            }
            Tensor::vector(data)
        } else if axis == 0 {
            let cols = first[1];
            let mut data = Vec::new();
            let mut rows = 0;
            for &id in inputs {
                rows += self.nodes[id].value.rows();
                data.extend_from_slice(self.nodes[id].value.data());
            }
            Tensor::new(vec![rows, cols], data)?
        } else {
            let rows = first[0];
            let total_cols: usize = inputs.iter().map(|&id| self.nodes[id].value.cols()).sum();
            let mut data = vec![0.0; rows * total_cols];
            let mut offset = 0;
            for &id in inputs {
                let t = &self.nodes[id].value;
                let c = t.cols();
                for r in 0..rows {
                    data[r * total_cols + offset..r * total_cols + offset + c]
                        .copy_from_slice(&t.data()[r * c..(r + 1) * c]);
                }
                offset += c;
            }
            Tensor::new(vec![rows, total_cols], data)?
        };
        let rg = self.needs(inputs);
        Ok(self.push(
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
            None,
        ))
    }

    /// Gather rows of a 2-D embedding table. Gradients scatter-add back into
    /// the selected rows only.
    pub fn lookup(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId, TensorError> {
        let shape = self.shape(table);
        if shape.len() != 2 {
            return Err(TensorError::BadShape {
                op: "lookup",
                expected: "2-D embedding table",
                got: shape,
            });
        }
        let (rows, cols) = (shape[0], shape[1]);
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &idx in indices {
            if idx >= rows {
                return Err(TensorError::IndexOutOfRange {
                    op: "lookup",
                    index: idx,
                    size: rows,
                });
            }
            data.extend_from_slice(&self.nodes[table].value.data()[idx * cols..(idx + 1) * cols]);
        }
        let value = Tensor::new(vec![indices.len(), cols], data)?;
        let rg = self.needs(&[table]);
        Ok(self.push(
            value,
            Op::Lookup {
                table,
                indices: indices.to_vec(),
            },
            rg,
            None,
        ))
    }

    /// Slide a width-`window` view over the rows of a 2-D tensor and flatten
    /// each view: (m, d) becomes (m - window + 1, window * d).
    pub fn unfold(&mut self, input: NodeId, window: usize) -> Result<NodeId, TensorError> {
        let shape = self.shape(input);
        if shape.len() != 2 || window == 0 || window > shape[0] {
            return Err(TensorError::BadShape {
                op: "unfold",
                expected: "2-D tensor with 1 <= window <= rows",
                got: shape,
            });
        }
        let (m, d) = (shape[0], shape[1]);
        let out_rows = m - window + 1;
        let x = self.nodes[input].value.data();
        let mut data = Vec::with_capacity(out_rows * window * d);
        for i in 0..out_rows {
            data.extend_from_slice(&x[i * d..(i + window) * d]);
        }
        let value = Tensor::new(vec![out_rows, window * d], data)?;
        let rg = self.needs(&[input]);
        Ok(self.push(value, Op::Unfold { input, window }, rg, None))
    }

    pub fn reshape(&mut self, input: NodeId, shape: Vec<usize>) -> Result<NodeId, TensorError> {
        let value = Tensor::new(shape, self.nodes[input].value.data().to_vec())?;
        let rg = self.needs(&[input]);
        Ok(self.push(value, Op::Reshape(input), rg, None))
    }

    /// Mean negative log-likelihood of one-hot gold classes under `pred`,
    /// a (batch, classes) tensor of row distributions.
    pub fn cross_entropy(&mut self, pred: NodeId, gold: &[usize]) -> Result<NodeId, TensorError> {
        let shape = self.shape(pred);
        if shape.len() != 2 || shape[0] != gold.len() {
            return Err(TensorError::BadShape {
                op: "cross_entropy",
                expected: "(batch, classes) predictions matching gold length",
                got: shape,
            });
        }
        let (rows, cols) = (shape[0], shape[1]);
        let x = self.nodes[pred].value.data();
        let mut total = 0.0;
        for (r, &class) in gold.iter().enumerate() {
            if class >= cols {
                return Err(TensorError::IndexOutOfRange {
                    op: "cross_entropy",
                    index: class,
                    size: cols,
                });
            }
            let sum: f64 = x[r * cols..(r + 1) * cols].iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(TensorError::NotNormalized { row: r, sum });
            }
            total -= (x[r * cols + class] + CROSS_ENTROPY_EPS).ln();
        }
        let value = Tensor::scalar(total / rows as f64);
        let rg = self.needs(&[pred]);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                pred,
                gold: gold.to_vec(),
            },
            rg,
            None,
        ))
    }

    fn unary(&mut self, input: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let value = Tensor::new(
            self.shape(input),
            self.nodes[input].value.data().iter().map(|&v| f(v)).collect(),
        )
        .expect("unary op preserves shape");
        let rg = self.needs(&[input]);
        self.push(value, op, rg, None)
    }

    fn zip(&self, lhs: NodeId, rhs: NodeId, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes[lhs]
            .value
            .data()
            .iter()
            .zip(self.nodes[rhs].value.data())
            .map(|(&a, &b)| f(a, b))
            .collect()
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Populates gradients for every
    /// reachable gradient-tracked node; other leaves are left untouched.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), TensorError> {
        if !self.nodes[loss].value.is_scalar() {
            return Err(TensorError::NotScalar {
                got: self.shape(loss),
            });
        }
        self.grads = vec![None; self.nodes.len()];
        if !self.nodes[loss].requires_grad {
            return Ok(());
        }
        self.grads[loss] = Some(vec![1.0]);
        for id in (0..=loss).rev() {
            if self.grads[id].is_none() {
                continue;
            }
            let g = self.grads[id].clone().expect("checked above");
            self.propagate(id, &g);
        }
        Ok(())
    }

    /// Add the gradients attached to bound parameters into the store.
    pub fn grads_into(&self, store: &mut ParamStore) {
        for (id, node) in self.nodes.iter().enumerate() {
            if let (Some(pid), Some(g)) = (node.param, self.grads.get(id).and_then(|g| g.as_ref())) {
                store.accumulate_grad(pid, g);
            }
        }
    }

    fn accumulate(&mut self, id: NodeId, contribution: &[f64]) {
        if !self.nodes[id].requires_grad {
            return;
        }
        let slot = self.grads[id].get_or_insert_with(|| vec![0.0; self.nodes[id].value.len()]);
        for (s, c) in slot.iter_mut().zip(contribution) {
            *s += c;
        }
    }

    fn accumulate_with(&mut self, id: NodeId, fill: impl FnOnce(&mut [f64])) {
        if !self.nodes[id].requires_grad {
            return;
        }
        let len = self.nodes[id].value.len();
        let mut buf = vec![0.0; len];
        fill(&mut buf);
        let slot = self.grads[id].get_or_insert_with(|| vec![0.0; len]);
        for (s, c) in slot.iter_mut().zip(&buf) {
            *s += c;
        }
    }

    fn propagate(&mut self, id: NodeId, g: &[f64]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::MatMul(lhs, rhs) => {
                let (lhs, rhs) = (*lhs, *rhs);
                let ls = self.shape(lhs);
                let rs = self.shape(rhs);
                let a = self.nodes[lhs].value.data().to_vec();
                let b = self.nodes[rhs].value.data().to_vec();
                match (ls.as_slice(), rs.as_slice()) {
                    ([m, k], [_, n]) if rs.len() == 2 && ls.len() == 2 => {
                        let (m, k, n) = (*m, *k, *n);
                        self.accumulate_with(lhs, |da| {
                            for i in 0..m {
                                for p in 0..k {
                                    let mut s = 0.0;
                                    for j in 0..n {
                                        s += g[i * n + j] * b[p * n + j];
                                    }
                                    da[i * k + p] = s;
                                }
                            }
                        });
                        self.accumulate_with(rhs, |db| {
                            for p in 0..k {
                                for j in 0..n {
                                    let mut s = 0.0;
                                    for i in 0..m {
                                        s += a[i * k + p] * g[i * n + j];
                                    }
                                    db[p * n + j] = s;
                                }
                            }
                        });
                    }
                    ([m, k], [_]) => {
                        let (m, k) = (*m, *k);
                        self.accumulate_with(lhs, |da| {
                            for i in 0..m {
                                for p in 0..k {
                                    da[i * k + p] = g[i] * b[p];
                                }
                            }
                        });
                        self.accumulate_with(rhs, |db| {
                            for p in 0..k {
                                let mut s = 0.0;
                                for i in 0..m {
                                    s += a[i * k + p] * g[i];
                                }
                                db[p] = s;
                            }
                        });
                    }
                    ([k], [_, n]) => {
                        let (k, n) = (*k, *n);
                        self.accumulate_with(lhs, |da| {
                            for p in 0..k {
                                let mut s = 0.0;
                                for j in 0..n {
                                    s += b[p * n + j] * g[j];
                                }
                                da[p] = s;
                            }
                        });
                        self.accumulate_with(rhs, |db| {
                            for p in 0..k {
                                for j in 0..n {
                                    db[p * n + j] = a[p] * g[j];
                                }
                            }
                        });
                    }
                    _ => unreachable!("matmul shapes validated on the forward pass"),
                }
            }
            Op::Add(lhs, rhs) => {
                let (lhs, rhs) = (*lhs, *rhs);
                self.accumulate(lhs, g);
                self.accumulate(rhs, g);
            }
            Op::AddRow(lhs, row) => {
                let (lhs, row) = (*lhs, *row);
                let n = self.nodes[row].value.len();
                let m = self.nodes[lhs].value.len() / n;
                self.accumulate(lhs, g);
                self.accumulate_with(row, |dr| {
                    for i in 0..m {
                        for j in 0..n {
                            dr[j] += g[i * n + j];
                        }
                    }
                });
            }
            Op::Sub(lhs, rhs) => {
                let (lhs, rhs) = (*lhs, *rhs);
                self.accumulate(lhs, g);
                self.accumulate_with(rhs, |dr| {
                    for (d, &gv) in dr.iter_mut().zip(g) {
                        *d = -gv;
                    }
                });
            }
            Op::Mul(lhs, rhs) => {
                let (lhs, rhs) = (*lhs, *rhs);
                let a = self.nodes[lhs].value.data().to_vec();
                let b = self.nodes[rhs].value.data().to_vec();
                self.accumulate_with(lhs, |da| {
                    for (i, d) in da.iter_mut().enumerate() {
                        *d = g[i] * b[i];
                    }
                });
                self.accumulate_with(rhs, |db| {
                    for (i, d) in db.iter_mut().enumerate() {
                        *d = g[i] * a[i];
                    }
                });
            }
            Op::Scale(input, factor) => {
                let (input, factor) = (*input, *factor);
                self.accumulate_with(input, |d| {
                    for (i, v) in d.iter_mut().enumerate() {
                        *v = g[i] * factor;
                    }
                });
            }
            Op::Concat { inputs, axis } => {
                let inputs = inputs.clone();
                let axis = *axis;
                let rank = self.shape(inputs[0]).len();
                if rank == 1 || axis == 0 {
                    let mut offset = 0;
                    for id in inputs {
                        let len = self.nodes[id].value.len();
                        let slice = g[offset..offset + len].to_vec();
                        self.accumulate(id, &slice);
                        offset += len;
                    }
                } else {
                    let rows = self.shape(inputs[0])[0];
                    let total_cols: usize =
                        inputs.iter().map(|&id| self.nodes[id].value.cols()).sum();
                    let mut offset = 0;
                    for id in inputs {
                        let c = self.nodes[id].value.cols();
                        let mut slice = vec![0.0; rows * c];
                        for r in 0..rows {
                            slice[r * c..(r + 1) * c].copy_from_slice(
                                &g[r * total_cols + offset..r * total_cols + offset + c],
                            );
                        }
                        self.accumulate(id, &slice);
                        offset += c;
                    }
                }
            }
            Op::Relu(input) => {
                let input = *input;
                let x = self.nodes[input].value.data().to_vec();
                self.accumulate_with(input, |d| {
                    for (i, v) in d.iter_mut().enumerate() {
                        *v = if x[i] > 0.0 { g[i] } else { 0.0 };
                    }
                });
            }
            Op::Sigmoid(input) => {
                let input = *input;
                let y = self.nodes[id].value.data().to_vec();
                self.accumulate_with(input, |d| {
                    for (i, v) in d.iter_mut().enumerate() {
                        *v = g[i] * y[i] * (1.0 - y[i]);
                    }
                });
            }
            Op::Tanh(input) => {
                let input = *input;
                let y = self.nodes[id].value.data().to_vec();
                self.accumulate_with(input, |d| {
                    for (i, v) in d.iter_mut().enumerate() {
                        *v = g[i] * (1.0 - y[i] * y[i]);
                    }
                });
            }
            Op::Softmax(input) => {
                let input = *input;
                let y = self.nodes[id].value.data().to_vec();
                let shape = self.shape(id);
                let cols = *shape.last().expect("softmax output is non-empty");
                let rows = y.len() / cols;
                self.accumulate_with(input, |d| {
                    for r in 0..rows {
                        let ys = &y[r * cols..(r + 1) * cols];
                        let gs = &g[r * cols..(r + 1) * cols];
                        let dot: f64 = ys.iter().zip(gs).map(|(&a, &b)| a * b).sum();
                        for j in 0..cols {
                            d[r * cols + j] = ys[j] * (gs[j] - dot);
                        }
                    }
                });
            }
            Op::SumAxis { input, axis } => {
                let (input, axis) = (*input, *axis);
                let shape = self.shape(input);
                let (m, n) = (shape[0], shape[1]);
                self.accumulate_with(input, |d| {
                    for i in 0..m {
                        for j in 0..n {
                            d[i * n + j] = if axis == 0 { g[j] } else { g[i] };
                        }
                    }
                });
            }
            Op::MaxAxis { input, axis, argmax } => {
                let (input, axis) = (*input, *axis);
                let argmax = argmax.clone();
                let shape = self.shape(input);
                let n = shape[1];
                self.accumulate_with(input, |d| {
                    for (j, &i) in argmax.iter().enumerate() {
                        if axis == 0 {
                            d[i * n + j] = g[j];
                        } else {
                            d[j * n + i] = g[j];
                        }
                    }
                });
            }
            Op::SumAll(input) => {
                let input = *input;
                let gv = g[0];
                self.accumulate_with(input, |d| {
                    for v in d.iter_mut() {
                        *v = gv;
                    }
                });
            }
            Op::Lookup { table, indices } => {
                let table = *table;
                let indices = indices.clone();
                let cols = self.nodes[table].value.cols();
                self.accumulate_with(table, |d| {
                    for (r, &idx) in indices.iter().enumerate() {
                        for j in 0..cols {
                            d[idx * cols + j] += g[r * cols + j];
                        }
                    }
                });
            }
            Op::Unfold { input, window } => {
                let (input, window) = (*input, *window);
                let d_cols = self.shape(input)[1];
                let out_rows = self.shape(id)[0];
                self.accumulate_with(input, |d| {
                    for i in 0..out_rows {
                        for w in 0..window {
                            for c in 0..d_cols {
                                d[(i + w) * d_cols + c] += g[i * (window * d_cols) + w * d_cols + c];
                            }
                        }
                    }
                });
            }
            Op::Reshape(input) => {
                let input = *input;
                self.accumulate(input, g);
            }
            Op::CrossEntropy { pred, gold } => {
                let pred = *pred;
                let gold = gold.clone();
                let cols = self.nodes[pred].value.cols();
                let x = self.nodes[pred].value.data().to_vec();
                let batch = gold.len() as f64;
                let gv = g[0];
                self.accumulate_with(pred, |d| {
                    for (r, &class) in gold.iter().enumerate() {
                        d[r * cols + class] =
                            -gv / (batch * (x[r * cols + class] + CROSS_ENTROPY_EPS));
                    }
                });
            }
        }
    }
}
