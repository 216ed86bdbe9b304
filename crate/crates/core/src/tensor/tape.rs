//! Reverse-mode tape.
//!
//! Every operation appends one node; node indices are therefore a valid
//! topological order, and the backward sweep is a single reverse walk that
//! visits each recorded operation exactly once. A backward pass works on
//! fresh adjoint buffers and only folds the results into per-node
//! accumulated gradients at the end, so repeated calls accumulate instead
//! of compounding.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::{check_shape, Tensor};

/// Numpy-style broadcast of two shapes, aligned from the trailing axis.
pub fn broadcast_shape(lhs: &[usize], rhs: &[usize]) -> Option<Vec<usize>> {
    let rank = lhs.len().max(rhs.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let a = if i < lhs.len() { lhs[lhs.len() - 1 - i] } else { 1 };
        let b = if i < rhs.len() { rhs[rhs.len() - 1 - i] } else { 1 };
        if a != b && a != 1 && b != 1 {
            return None;
        }
        out[rank - 1 - i] = a.max(b);
    }
    Some(out)
}

/// Flat-index map from an output coordinate to an input element, with
/// stride zero on axes the input stretches across.
struct BroadcastMap {
    strides: Vec<usize>,
    out_shape: Vec<usize>,
}

impl BroadcastMap {
    fn new(in_shape: &[usize], out_shape: &[usize]) -> Self {
        let rank = out_shape.len();
        let offset = rank - in_shape.len();
        // Row-major strides of the input, padded with leading ones.
        let mut in_strides = vec![0usize; rank];
        let mut acc = 1usize;
        for i in (0..rank).rev() {
            let dim = if i >= offset { in_shape[i - offset] } else { 1 };
            in_strides[i] = if dim == 1 { 0 } else { acc };
            acc *= dim;
        }
        Self {
            strides: in_strides,
            out_shape: out_shape.to_vec(),
        }
    }

    fn index(&self, out_flat: usize) -> usize {
        let mut rem = out_flat;
        let mut idx = 0usize;
        for i in (0..self.out_shape.len()).rev() {
            let coord = rem % self.out_shape[i];
            rem /= self.out_shape[i];
            idx += coord * self.strides[i];
        }
        idx
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Constant,
    Matmul { a: usize, b: usize, m: usize, k: usize, n: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Relu { a: usize },
    Sigmoid { a: usize },
    Tanh { a: usize },
    Abs { a: usize },
    Affine { a: usize, scale: f64 },
    SoftmaxRows { a: usize, rows: usize, cols: usize },
    ConcatLast { a: usize, b: usize, rows: usize, a_cols: usize, b_cols: usize },
    SumAll { a: usize },
    Reshape { a: usize },
    SwapLeading { a: usize, d0: usize, d1: usize, inner: usize },
    Transpose { a: usize, rows: usize, cols: usize },
    Row { a: usize, index: usize, cols: usize },
}

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    // True when the node depends on at least one trainable leaf.
    needs_grad: bool,
    grad: Option<Vec<f64>>,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    ops: Vec<Op>,
}

/// Recording tape. Cheap to clone; all clones share the same recording.
#[derive(Clone, Default)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

/// Handle to one node on a tape.
#[derive(Clone)]
pub struct Var {
    tape: Tape,
    idx: usize,
}

impl std::fmt::Debug for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("idx", &self.idx)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, shape: Vec<usize>, data: Vec<f64>, needs_grad: bool, op: Op) -> Var {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node {
            shape,
            data,
            needs_grad,
            grad: None,
        });
        inner.ops.push(op);
        Var {
            tape: self.clone(),
            idx: inner.nodes.len() - 1,
        }
    }

    /// Registers a trainable or frozen tensor according to its
    /// `requires_grad` flag.
    pub fn leaf(&self, tensor: &Tensor) -> Var {
        self.push(
            tensor.shape().to_vec(),
            tensor.data().to_vec(),
            tensor.requires_grad(),
            Op::Leaf,
        )
    }

    /// Registers fixed input data that never receives a gradient.
    pub fn constant(&self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        check_shape("Tape::constant", &shape)?;
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::InvalidShape {
                op: "Tape::constant",
                message: format!("shape {shape:?} implies {numel} elements, got {}", data.len()),
            });
        }
        Ok(self.push(shape, data, false, Op::Constant))
    }

    pub fn constant_tensor(&self, tensor: &Tensor) -> Var {
        self.push(
            tensor.shape().to_vec(),
            tensor.data().to_vec(),
            false,
            Op::Constant,
        )
    }

    fn same_tape(&self, other: &Tape) -> Result<()> {
        if Rc::ptr_eq(&self.inner, &other.inner) {
            Ok(())
        } else {
            Err(Error::Graph("operands belong to different tapes".into()))
        }
    }

    /// Parent node indices of `idx`; used to check recording order.
    #[cfg(test)]
    pub(crate) fn parents_of(&self, idx: usize) -> Vec<usize> {
        match self.inner.borrow().ops[idx] {
            Op::Leaf | Op::Constant => vec![],
            Op::Matmul { a, b, .. }
            | Op::Add { a, b }
            | Op::Sub { a, b }
            | Op::Mul { a, b }
            | Op::ConcatLast { a, b, .. } => vec![a, b],
            Op::Relu { a }
            | Op::Sigmoid { a }
            | Op::Tanh { a }
            | Op::Abs { a }
            | Op::Affine { a, .. }
            | Op::SoftmaxRows { a, .. }
            | Op::SumAll { a }
            | Op::Reshape { a }
            | Op::SwapLeading { a, .. }
            | Op::Transpose { a, .. }
            | Op::Row { a, .. } => vec![a],
        }
    }

    fn backward_from(&self, root: usize) -> Result<()> {
        let mut inner = self.inner.borrow_mut();
        let inner = &mut *inner;
        if inner.nodes[root].data.len() != 1 {
            return Err(Error::InvalidShape {
                op: "backward",
                message: format!(
                    "root must be a scalar, got shape {:?}",
                    inner.nodes[root].shape
                ),
            });
        }
        // Fresh adjoints for this sweep; accumulated node gradients are only
        // touched at the end.
        let mut adj: Vec<Vec<f64>> = inner
            .nodes
            .iter()
            .map(|n| vec![0.0; n.data.len()])
            .collect();
        adj[root][0] = 1.0;
        for idx in (0..=root).rev() {
            if !inner.nodes[idx].needs_grad {
                continue;
            }
            let (parents, rest) = adj.split_at_mut(idx);
            let g: &[f64] = &rest[0];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            let nodes = &inner.nodes;
            match inner.ops[idx] {
                Op::Leaf | Op::Constant => {}
                Op::Matmul { a, b, m, k, n } => {
                    {
                        let bd = &nodes[b].data;
                        let pa = &mut parents[a];
                        for i in 0..m {
                            for p in 0..k {
                                let mut acc = 0.0;
                                for j in 0..n {
                                    acc += g[i * n + j] * bd[p * n + j];
                                }
                                pa[i * k + p] += acc;
                            }
                        }
                    }
                    {
                        let ad = &nodes[a].data;
                        let pb = &mut parents[b];
                        for p in 0..k {
                            for i in 0..m {
                                let api = ad[i * k + p];
                                if api == 0.0 {
                                    continue;
                                }
                                for j in 0..n {
                                    pb[p * n + j] += api * g[i * n + j];
                                }
                            }
                        }
                    }
                }
                Op::Add { a, b } => {
                    let out_shape = &nodes[idx].shape;
                    let map_a = BroadcastMap::new(&nodes[a].shape, out_shape);
                    let map_b = BroadcastMap::new(&nodes[b].shape, out_shape);
                    {
                        let pa = &mut parents[a];
                        for (flat, gv) in g.iter().enumerate() {
                            pa[map_a.index(flat)] += gv;
                        }
                    }
                    {
                        let pb = &mut parents[b];
                        for (flat, gv) in g.iter().enumerate() {
                            pb[map_b.index(flat)] += gv;
                        }
                    }
                }
                Op::Sub { a, b } => {
                    let out_shape = &nodes[idx].shape;
                    let map_a = BroadcastMap::new(&nodes[a].shape, out_shape);
                    let map_b = BroadcastMap::new(&nodes[b].shape, out_shape);
                    {
                        let pa = &mut parents[a];
                        for (flat, gv) in g.iter().enumerate() {
                            pa[map_a.index(flat)] += gv;
                        }
                    }
                    {
                        let pb = &mut parents[b];
                        for (flat, gv) in g.iter().enumerate() {
                            pb[map_b.index(flat)] -= gv;
                        }
                    }
                }
                Op::Mul { a, b } => {
                    let out_shape = &nodes[idx].shape;
                    let map_a = BroadcastMap::new(&nodes[a].shape, out_shape);
                    let map_b = BroadcastMap::new(&nodes[b].shape, out_shape);
                    {
                        let bd = &nodes[b].data;
                        let pa = &mut parents[a];
                        for (flat, gv) in g.iter().enumerate() {
                            pa[map_a.index(flat)] += gv * bd[map_b.index(flat)];
                        }
                    }
                    {
                        let ad = &nodes[a].data;
                        let pb = &mut parents[b];
                        for (flat, gv) in g.iter().enumerate() {
                            pb[map_b.index(flat)] += gv * ad[map_a.index(flat)];
                        }
                    }
                }
                Op::Relu { a } => {
                    let ad = &nodes[a].data;
                    let pa = &mut parents[a];
                    for (i, gv) in g.iter().enumerate() {
                        // Subgradient zero at the kink.
                        if ad[i] > 0.0 {
                            pa[i] += gv;
                        }
                    }
                }
                Op::Sigmoid { a } => {
                    let out = &nodes[idx].data;
                    let pa = &mut parents[a];
                    for (i, gv) in g.iter().enumerate() {
                        pa[i] += gv * out[i] * (1.0 - out[i]);
                    }
                }
                Op::Tanh { a } => {
                    let out = &nodes[idx].data;
                    let pa = &mut parents[a];
                    for (i, gv) in g.iter().enumerate() {
                        pa[i] += gv * (1.0 - out[i] * out[i]);
                    }
                }
                Op::Abs { a } => {
                    let ad = &nodes[a].data;
                    let pa = &mut parents[a];
                    for (i, gv) in g.iter().enumerate() {
                        // Subgradient zero at the kink.
                        pa[i] += gv * if ad[i] > 0.0 {
                            1.0
                        } else if ad[i] < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                    }
                }
                Op::Affine { a, scale } => {
                    let pa = &mut parents[a];
                    for (i, gv) in g.iter().enumerate() {
                        pa[i] += gv * scale;
                    }
                }
                Op::SoftmaxRows { a, rows, cols } => {
                    let out = &nodes[idx].data;
                    let pa = &mut parents[a];
                    for r in 0..rows {
                        let row = r * cols;
                        let mut dot = 0.0;
                        for c in 0..cols {
                            dot += g[row + c] * out[row + c];
                        }
                        for c in 0..cols {
                            pa[row + c] += out[row + c] * (g[row + c] - dot);
                        }
                    }
                }
                Op::ConcatLast { a, b, rows, a_cols, b_cols } => {
                    let cols = a_cols + b_cols;
                    {
                        let pa = &mut parents[a];
                        for r in 0..rows {
                            for c in 0..a_cols {
                                pa[r * a_cols + c] += g[r * cols + c];
                            }
                        }
                    }
                    {
                        let pb = &mut parents[b];
                        for r in 0..rows {
                            for c in 0..b_cols {
                                pb[r * b_cols + c] += g[r * cols + a_cols + c];
                            }
                        }
                    }
                }
                Op::SumAll { a } => {
                    let pa = &mut parents[a];
                    for v in pa.iter_mut() {
                        *v += g[0];
                    }
                }
                Op::Reshape { a } => {
                    let pa = &mut parents[a];
                    for (i, gv) in g.iter().enumerate() {
                        pa[i] += gv;
                    }
                }
                Op::SwapLeading { a, d0, d1, inner } => {
                    let pa = &mut parents[a];
                    for i in 0..d0 {
                        for j in 0..d1 {
                            let src = (j * d0 + i) * inner;
                            let dst = (i * d1 + j) * inner;
                            for q in 0..inner {
                                pa[dst + q] += g[src + q];
                            }
                        }
                    }
                }
                Op::Transpose { a, rows, cols } => {
                    let pa = &mut parents[a];
                    for r in 0..rows {
                        for c in 0..cols {
                            pa[r * cols + c] += g[c * rows + r];
                        }
                    }
                }
                Op::Row { a, index, cols } => {
                    let pa = &mut parents[a];
                    for c in 0..cols {
                        pa[index * cols + c] += g[c];
                    }
                }
            }
        }
        for (node, buf) in inner.nodes.iter_mut().zip(adj) {
            if node.needs_grad {
                let grad = node.grad.get_or_insert_with(|| vec![0.0; buf.len()]);
                for (gv, bv) in grad.iter_mut().zip(&buf) {
                    *gv += bv;
                }
            }
        }
        Ok(())
    }
}

impl Var {
    pub fn shape(&self) -> Vec<usize> {
        self.tape.inner.borrow().nodes[self.idx].shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.tape.inner.borrow().nodes[self.idx].data.len()
    }

    pub fn index(&self) -> usize {
        self.idx
    }

    pub fn data(&self) -> Vec<f64> {
        self.tape.inner.borrow().nodes[self.idx].data.clone()
    }

    pub fn value(&self) -> Tensor {
        let inner = self.tape.inner.borrow();
        let node = &inner.nodes[self.idx];
        Tensor::new(node.shape.clone(), node.data.clone()).expect("node shape is valid")
    }

    pub fn is_finite(&self) -> bool {
        self.tape.inner.borrow().nodes[self.idx]
            .data
            .iter()
            .all(|v| v.is_finite())
    }

    /// Gradient accumulated by backward passes, `None` for nodes that do not
    /// depend on a trainable leaf or before any backward call.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.tape.inner.borrow().nodes[self.idx].grad.clone()
    }

    /// Runs one reverse sweep from this scalar node. Gradients add to any
    /// previously accumulated ones.
    pub fn backward(&self) -> Result<()> {
        self.tape.backward_from(self.idx)
    }

    fn node_shape(&self) -> Vec<usize> {
        self.shape()
    }

    /// Strict 2-d matrix product.
    pub fn matmul(&self, rhs: &Var) -> Result<Var> {
        self.tape.same_tape(&rhs.tape)?;
        let ls = self.node_shape();
        let rs = rhs.node_shape();
        if ls.len() != 2 || rs.len() != 2 || ls[1] != rs[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: ls,
                rhs: rs,
            });
        }
        let (m, k, n) = (ls[0], ls[1], rs[1]);
        let inner = self.tape.inner.borrow();
        let a = &inner.nodes[self.idx].data;
        let b = &inner.nodes[rhs.idx].data;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = a[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += aip * b[p * n + j];
                }
            }
        }
        let needs = inner.nodes[self.idx].needs_grad || inner.nodes[rhs.idx].needs_grad;
        drop(inner);
        Ok(self.tape.push(
            vec![m, n],
            out,
            needs,
            Op::Matmul {
                a: self.idx,
                b: rhs.idx,
                m,
                k,
                n,
            },
        ))
    }

    fn binary_broadcast(
        &self,
        rhs: &Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: impl Fn(usize, usize) -> Op,
    ) -> Result<Var> {
        self.tape.same_tape(&rhs.tape)?;
        let ls = self.node_shape();
        let rs = rhs.node_shape();
        let out_shape = broadcast_shape(&ls, &rs).ok_or(Error::ShapeMismatch {
            op: name,
            lhs: ls.clone(),
            rhs: rs.clone(),
        })?;
        let numel: usize = out_shape.iter().product();
        let map_a = BroadcastMap::new(&ls, &out_shape);
        let map_b = BroadcastMap::new(&rs, &out_shape);
        let inner = self.tape.inner.borrow();
        let a = &inner.nodes[self.idx].data;
        let b = &inner.nodes[rhs.idx].data;
        let mut out = Vec::with_capacity(numel);
        for flat in 0..numel {
            out.push(f(a[map_a.index(flat)], b[map_b.index(flat)]));
        }
        let needs = inner.nodes[self.idx].needs_grad || inner.nodes[rhs.idx].needs_grad;
        drop(inner);
        Ok(self
            .tape
            .push(out_shape, out, needs, op(self.idx, rhs.idx)))
    }

    /// Elementwise sum with trailing-axis broadcasting.
    pub fn add(&self, rhs: &Var) -> Result<Var> {
        self.binary_broadcast(rhs, "add", |a, b| a + b, |a, b| Op::Add { a, b })
    }

    /// Elementwise difference with trailing-axis broadcasting.
    pub fn sub(&self, rhs: &Var) -> Result<Var> {
        self.binary_broadcast(rhs, "sub", |a, b| a - b, |a, b| Op::Sub { a, b })
    }

    /// Elementwise product with trailing-axis broadcasting.
    pub fn hadamard(&self, rhs: &Var) -> Result<Var> {
        self.binary_broadcast(rhs, "hadamard", |a, b| a * b, |a, b| Op::Mul { a, b })
    }

    fn unary(&self, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let inner = self.tape.inner.borrow();
        let node = &inner.nodes[self.idx];
        let out: Vec<f64> = node.data.iter().map(|&v| f(v)).collect();
        let shape = node.shape.clone();
        let needs = node.needs_grad;
        drop(inner);
        self.tape.push(shape, out, needs, op)
    }

    pub fn relu(&self) -> Var {
        self.unary(|v| if v > 0.0 { v } else { 0.0 }, Op::Relu { a: self.idx })
    }

    pub fn sigmoid(&self) -> Var {
        self.unary(
            |v| {
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            },
            Op::Sigmoid { a: self.idx },
        )
    }

    pub fn tanh(&self) -> Var {
        self.unary(f64::tanh, Op::Tanh { a: self.idx })
    }

    pub fn abs(&self) -> Var {
        self.unary(f64::abs, Op::Abs { a: self.idx })
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&self, scale: f64, shift: f64) -> Var {
        self.unary(
            |v| scale * v + shift,
            Op::Affine {
                a: self.idx,
                scale,
            },
        )
    }

    /// Row-wise softmax of a 2-d tensor, with the row maximum subtracted
    /// before exponentiation. Rows of the result sum to one.
    pub fn softmax_rows(&self) -> Result<Var> {
        let shape = self.node_shape();
        if shape.len() != 2 {
            return Err(Error::InvalidShape {
                op: "softmax_rows",
                message: format!("expected a 2-d tensor, got shape {shape:?}"),
            });
        }
        let (rows, cols) = (shape[0], shape[1]);
        let inner = self.tape.inner.borrow();
        let node = &inner.nodes[self.idx];
        if !node.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric {
                stage: "softmax".into(),
                message: "non-finite input".into(),
            });
        }
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &node.data[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for c in 0..cols {
                let e = (row[c] - max).exp();
                out[r * cols + c] = e;
                sum += e;
            }
            for c in 0..cols {
                out[r * cols + c] /= sum;
            }
        }
        let needs = node.needs_grad;
        drop(inner);
        Ok(self.tape.push(
            vec![rows, cols],
            out,
            needs,
            Op::SoftmaxRows {
                a: self.idx,
                rows,
                cols,
            },
        ))
    }

    /// Concatenation along the last axis. All leading axes must match.
    pub fn concat_last(&self, rhs: &Var) -> Result<Var> {
        self.tape.same_tape(&rhs.tape)?;
        let ls = self.node_shape();
        let rs = rhs.node_shape();
        let ok = ls.len() == rs.len()
            && !ls.is_empty()
            && ls[..ls.len() - 1] == rs[..rs.len() - 1];
        if !ok {
            return Err(Error::ShapeMismatch {
                op: "concat_last",
                lhs: ls,
                rhs: rs,
            });
        }
        let a_cols = ls[ls.len() - 1];
        let b_cols = rs[rs.len() - 1];
        let rows: usize = ls[..ls.len() - 1].iter().product();
        let mut out_shape = ls.clone();
        *out_shape.last_mut().unwrap() = a_cols + b_cols;
        let inner = self.tape.inner.borrow();
        let a = &inner.nodes[self.idx].data;
        let b = &inner.nodes[rhs.idx].data;
        let mut out = Vec::with_capacity(rows * (a_cols + b_cols));
        for r in 0..rows {
            out.extend_from_slice(&a[r * a_cols..(r + 1) * a_cols]);
            out.extend_from_slice(&b[r * b_cols..(r + 1) * b_cols]);
        }
        let needs = inner.nodes[self.idx].needs_grad || inner.nodes[rhs.idx].needs_grad;
        drop(inner);
        Ok(self.tape.push(
            out_shape,
            out,
            needs,
            Op::ConcatLast {
                a: self.idx,
                b: rhs.idx,
                rows,
                a_cols,
                b_cols,
            },
        ))
    }

    /// Sum of all elements, as a scalar of shape `[1]`.
    pub fn sum_all(&self) -> Var {
        let inner = self.tape.inner.borrow();
        let node = &inner.nodes[self.idx];
        let total: f64 = node.data.iter().sum();
        let needs = node.needs_grad;
        drop(inner);
        self.tape
            .push(vec![1], vec![total], needs, Op::SumAll { a: self.idx })
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Var> {
        check_shape("reshape", shape)?;
        let numel: usize = shape.iter().product();
        if numel != self.numel() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.node_shape(),
                rhs: shape.to_vec(),
            });
        }
        let inner = self.tape.inner.borrow();
        let node = &inner.nodes[self.idx];
        let data = node.data.clone();
        let needs = node.needs_grad;
        drop(inner);
        Ok(self
            .tape
            .push(shape.to_vec(), data, needs, Op::Reshape { a: self.idx }))
    }

    /// Swaps the first two axes of a tensor of rank at least two.
    pub fn swap_leading_axes(&self) -> Result<Var> {
        let shape = self.node_shape();
        if shape.len() < 2 {
            return Err(Error::InvalidShape {
                op: "swap_leading_axes",
                message: format!("expected rank >= 2, got shape {shape:?}"),
            });
        }
        let (d0, d1) = (shape[0], shape[1]);
        let inner_len: usize = shape[2..].iter().product();
        let tape = self.tape.inner.borrow();
        let node = &tape.nodes[self.idx];
        let mut out = vec![0.0; node.data.len()];
        for i in 0..d0 {
            for j in 0..d1 {
                let src = (i * d1 + j) * inner_len;
                let dst = (j * d0 + i) * inner_len;
                out[dst..dst + inner_len].copy_from_slice(&node.data[src..src + inner_len]);
            }
        }
        let mut out_shape = shape.clone();
        out_shape.swap(0, 1);
        let needs = node.needs_grad;
        drop(tape);
        Ok(self.tape.push(
            out_shape,
            out,
            needs,
            Op::SwapLeading {
                a: self.idx,
                d0,
                d1,
                inner: inner_len,
            },
        ))
    }

    /// 2-d transpose.
    pub fn transpose(&self) -> Result<Var> {
        let shape = self.node_shape();
        if shape.len() != 2 {
            return Err(Error::InvalidShape {
                op: "transpose",
                message: format!("expected a 2-d tensor, got shape {shape:?}"),
            });
        }
        let (rows, cols) = (shape[0], shape[1]);
        let inner = self.tape.inner.borrow();
        let node = &inner.nodes[self.idx];
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = node.data[r * cols + c];
            }
        }
        let needs = node.needs_grad;
        drop(inner);
        Ok(self.tape.push(
            vec![cols, rows],
            out,
            needs,
            Op::Transpose {
                a: self.idx,
                rows,
                cols,
            },
        ))
    }

    /// Single row of a 2-d tensor, as shape `[1, cols]`.
    pub fn row(&self, index: usize) -> Result<Var> {
        let shape = self.node_shape();
        if shape.len() != 2 || index >= shape[0] {
            return Err(Error::InvalidShape {
                op: "row",
                message: format!("row {index} out of range for shape {shape:?}"),
            });
        }
        let cols = shape[1];
        let inner = self.tape.inner.borrow();
        let node = &inner.nodes[self.idx];
        let out = node.data[index * cols..(index + 1) * cols].to_vec();
        let needs = node.needs_grad;
        drop(inner);
        Ok(self.tape.push(
            vec![1, cols],
            out,
            needs,
            Op::Row {
                a: self.idx,
                index,
                cols,
            },
        ))
    }
}
