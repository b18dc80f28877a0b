//! Reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Tape`] records every primitive applied during a forward pass. Node ids
//! are handed out in creation order, so the record is already topologically
//! sorted and [`Tape::backward`] just walks it in reverse.
//!
//! Model parameters enter the tape through [`Tape::param`] (whole tensor) or
//! [`Tape::param_row`] (a single row, used for embedding lookups). Both remember
//! which [`ParamId`] they came from so gradients can be folded back into a
//! [`ParamGrads`] buffer with one entry per parameter tensor.

use std::collections::HashMap;

use super::matrix::{sigmoid, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

/// Position of a tensor in a model's [`Parameters`] ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    ParamRow { param: ParamId, row: usize },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Ln(NodeId),
    Affine { input: NodeId, scale: f64 },
    Softmax(NodeId),
    Pick { input: NodeId, index: usize },
    SliceRows { input: NodeId, start: usize },
    Concat(NodeId, NodeId),
    Sum(NodeId),
    AddN(Vec<NodeId>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound: HashMap<ParamId, NodeId>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// A value that receives no parameter gradient.
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// Binds a whole parameter tensor. Repeated calls with the same id return
    /// the same node, so the tensor is copied onto the tape once.
    pub fn param(&mut self, id: ParamId, value: &Matrix) -> NodeId {
        if let Some(&node) = self.bound.get(&id) {
            return node;
        }
        let node = self.push(value.clone(), Op::Param(id));
        self.bound.insert(id, node);
        node
    }

    /// Binds one row of a parameter tensor as a column vector.
    pub fn param_row(&mut self, id: ParamId, table: &Matrix, row: usize) -> Result<NodeId> {
        if row >= table.rows() {
            return Err(Error::InvalidArgument(format!(
                "row {row} out of range for a table with {} rows",
                table.rows()
            )));
        }
        let v = Matrix::column(table.row(row));
        Ok(self.push(v, Op::ParamRow { param: id, row }))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.value(a).check_same_shape(self.value(b), "add")?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.value(a).check_same_shape(self.value(b), "mul")?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Ln(a))
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: NodeId, scale: f64, shift: f64) -> NodeId {
        let v = self.value(a).map(|x| scale * x + shift);
        self.push(v, Op::Affine { input: a, scale })
    }

    pub fn scale(&mut self, a: NodeId, scale: f64) -> NodeId {
        self.affine(a, scale, 0.0)
    }

    /// Softmax over all entries of `a`. With a mask, excluded entries are
    /// forced to probability zero and carry no gradient.
    pub fn softmax(&mut self, a: NodeId, allowed: Option<&[bool]>) -> Result<NodeId> {
        let src = self.value(a);
        let probs = super::matrix::masked_softmax(src.data(), allowed)?;
        let v = Matrix::from_vec(src.rows(), src.cols(), probs)?;
        Ok(self.push(v, Op::Softmax(a)))
    }

    /// Flat element `index` of `a` as a `1 x 1` node.
    pub fn pick(&mut self, a: NodeId, index: usize) -> Result<NodeId> {
        let src = self.value(a);
        let &x = src.data().get(index).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "index {index} out of range for {} values",
                src.len()
            ))
        })?;
        Ok(self.push(Matrix::scalar(x), Op::Pick { input: a, index }))
    }

    /// Rows `start..start + len` of a column vector.
    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let src = self.value(a);
        if src.cols() != 1 || start + len > src.rows() {
            return Err(Error::InvalidShape(format!(
                "slice {start}..{} of a {}x{} node",
                start + len,
                src.rows(),
                src.cols()
            )));
        }
        let v = Matrix::column(&src.data()[start..start + len]);
        Ok(self.push(v, Op::SliceRows { input: a, start }))
    }

    /// Vertical concatenation of two column vectors.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != 1 || vb.cols() != 1 {
            return Err(Error::InvalidShape("concat expects column vectors".into()));
        }
        let mut data = va.data().to_vec();
        data.extend_from_slice(vb.data());
        let v = Matrix::column(&data);
        Ok(self.push(v, Op::Concat(a, b)))
    }

    /// Sum of all entries, as a `1 x 1` node.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().sum();
        self.push(Matrix::scalar(s), Op::Sum(a))
    }

    /// Elementwise sum of same-shaped nodes.
    pub fn add_n(&mut self, items: &[NodeId]) -> Result<NodeId> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("add_n of nothing".into()))?;
        let mut acc = self.value(*first).clone();
        for &n in &items[1..] {
            acc.check_same_shape(self.value(n), "add_n")?;
            acc.add_assign(self.value(n));
        }
        Ok(self.push(acc, Op::AddN(items.to_vec())))
    }

    /// Reverse sweep from a scalar `loss`. Accumulators start at zero on
    /// every call; the tape itself is not modified.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got {}x{}",
                shape.0, shape.1
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant | Op::Param(_) | Op::ParamRow { .. } => {}
                Op::MatMul(a, b) => {
                    let va = self.value(*a);
                    let vb = self.value(*b);
                    accumulate(&mut grads, *a, g.matmul(&vb.transpose())?);
                    accumulate(&mut grads, *b, va.transpose().matmul(&g)?);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Mul(a, b) => {
                    accumulate(&mut grads, *a, g.zip_map(self.value(*b), |x, y| x * y));
                    accumulate(&mut grads, *b, g.zip_map(self.value(*a), |x, y| x * y));
                }
                Op::Sigmoid(a) => {
                    let d = g.zip_map(&node.value, |gv, y| gv * y * (1.0 - y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = g.zip_map(&node.value, |gv, y| gv * (1.0 - y * y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Ln(a) => {
                    let d = g.zip_map(self.value(*a), |gv, x| gv / x);
                    accumulate(&mut grads, *a, d);
                }
                Op::Affine { input, scale } => {
                    accumulate(&mut grads, *input, g.map(|gv| gv * scale));
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let dot: f64 = g.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
                    let d = g.zip_map(y, |gv, yv| yv * (gv - dot));
                    accumulate(&mut grads, *a, d);
                }
                Op::Pick { input, index } => {
                    let src = self.value(*input);
                    let mut d = Matrix::zeros(src.rows(), src.cols());
                    d.data_mut()[*index] = g.data()[0];
                    accumulate(&mut grads, *input, d);
                }
                Op::SliceRows { input, start } => {
                    let src = self.value(*input);
                    let mut d = Matrix::zeros(src.rows(), 1);
                    d.data_mut()[*start..*start + g.len()].copy_from_slice(g.data());
                    accumulate(&mut grads, *input, d);
                }
                Op::Concat(a, b) => {
                    let na = self.value(*a).rows();
                    accumulate(&mut grads, *a, Matrix::column(&g.data()[..na]));
                    accumulate(&mut grads, *b, Matrix::column(&g.data()[na..]));
                }
                Op::Sum(a) => {
                    let src = self.value(*a);
                    let gv = g.data()[0];
                    accumulate(
                        &mut grads,
                        *a,
                        Matrix::from_fn(src.rows(), src.cols(), |_, _| gv),
                    );
                }
                Op::AddN(items) => {
                    for &n in items {
                        accumulate(&mut grads, n, g.clone());
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Runs [`Tape::backward`] and folds leaf gradients into one buffer per
    /// parameter tensor. `shapes` lists the shapes of every parameter in
    /// [`ParamId`] order.
    pub fn param_grads(&self, loss: NodeId, shapes: &[(usize, usize)]) -> Result<ParamGrads> {
        let node_grads = self.backward(loss)?;
        let mut out = ParamGrads::empty(shapes.len());
        for (idx, node) in self.nodes.iter().enumerate() {
            let Some(g) = node_grads.grads[idx].as_ref() else {
                continue;
            };
            match node.op {
                Op::Param(p) => {
                    let shape = shapes.get(p.0).ok_or_else(|| unknown_param(p))?;
                    out.entry(p, *shape).add_assign(g);
                }
                Op::ParamRow { param, row } => {
                    let shape = shapes.get(param.0).ok_or_else(|| unknown_param(param))?;
                    let slot = out.entry(param, *shape).row_mut(row);
                    for (s, v) in slot.iter_mut().zip(g.data()) {
                        *s += v;
                    }
                }
                _ => {}
            }
        }
        Ok(out)
    }
}

fn unknown_param(p: ParamId) -> Error {
    Error::InvalidArgument(format!("parameter {} not in shape list", p.0))
}

fn accumulate(grads: &mut [Option<Matrix>], node: NodeId, g: Matrix) {
    match &mut grads[node.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Per-node gradients from one backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `node`; `None` when the loss
    /// does not depend on it.
    pub fn wrt(&self, node: NodeId) -> Option<&Matrix> {
        self.grads.get(node.0).and_then(Option::as_ref)
    }
}

/// Gradient buffers aligned with a model's parameter ordering. Entries for
/// parameters the loss never touched stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    grads: Vec<Option<Matrix>>,
}

impl ParamGrads {
    pub fn empty(n: usize) -> Self {
        ParamGrads {
            grads: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<&Matrix>> {
        self.grads.iter().map(Option::as_ref)
    }

    fn entry(&mut self, id: ParamId, shape: (usize, usize)) -> &mut Matrix {
        self.grads[id.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1))
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .map(Matrix::squared_norm)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all gradients so the global L2 norm is at most `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for g in self.grads.iter_mut().flatten() {
                for v in g.data_mut() {
                    *v *= s;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_ones() {
        let p = Matrix::column(&[1.0, -2.0, 3.5]);
        let mut t = Tape::new();
        let x = t.param(ParamId(0), &p);
        let s = t.sum(x);
        let g = t.param_grads(s, &[(3, 1)]).unwrap();
        assert_eq!(g.get(ParamId(0)).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn half_squared_norm_gives_p() {
        let p = Matrix::column(&[0.3, -1.2, 2.0]);
        let mut t = Tape::new();
        let x = t.param(ParamId(0), &p);
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq);
        let loss = t.scale(s, 0.5);
        let g = t.param_grads(loss, &[(3, 1)]).unwrap();
        assert_eq!(g.get(ParamId(0)).unwrap(), &p);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::column(&[1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn param_bound_once() {
        let p = Matrix::column(&[1.0]);
        let mut t = Tape::new();
        let a = t.param(ParamId(3), &p);
        let b = t.param(ParamId(3), &p);
        assert_eq!(a, b);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn row_gradients_scatter() {
        let table = Matrix::from_fn(3, 2, |r, c| (r * 2 + c) as f64);
        let mut t = Tape::new();
        let r1 = t.param_row(ParamId(0), &table, 1).unwrap();
        let r1b = t.param_row(ParamId(0), &table, 1).unwrap();
        let both = t.add(r1, r1b).unwrap();
        let s = t.sum(both);
        let g = t.param_grads(s, &[(3, 2)]).unwrap();
        let g = g.get(ParamId(0)).unwrap();
        assert_eq!(g.row(0), &[0.0, 0.0]);
        assert_eq!(g.row(1), &[2.0, 2.0]);
        assert_eq!(g.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn untouched_params_have_no_gradient() {
        let p = Matrix::column(&[1.0]);
        let mut t = Tape::new();
        let x = t.param(ParamId(0), &p);
        let s = t.sum(x);
        let g = t.param_grads(s, &[(1, 1), (4, 4)]).unwrap();
        assert!(g.get(ParamId(1)).is_none());
    }

    #[test]
    fn clip_rescales() {
        let p = Matrix::column(&[3.0, 4.0]);
        let mut t = Tape::new();
        let x = t.param(ParamId(0), &p);
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq);
        let loss = t.scale(s, 0.5);
        let mut g = t.param_grads(loss, &[(2, 1)]).unwrap();
        g.clip_global_norm(1.0);
        let v = g.get(ParamId(0)).unwrap().data();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
    }
}
