use std::collections::HashMap;

use super::params::{ParamGrads, ParamId, ParameterSet};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn node_id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Tanh,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binary {
    Add,
    Mul,
}

/// Which broadcast, if any, an element-wise op applied to its right operand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Broadcast {
    None,
    /// A `k × 1` column added to every column of a `k × n` matrix.
    ColumnBias,
}

/// Stand-in for −∞ given to masked scores before exponentiation.
pub const MASKED_SCORE: f64 = -1e9;

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    EmbedRow { param: ParamId, row: usize },
    MatMul(Var, Var),
    Add(Var, Var),
    AddColBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    BroadcastCols(Var),
    ConcatRows(Var, Var),
    ConcatCols(Vec<Var>),
    Transpose(Var),
    Sum(Var),
    MaskedSoftmax(Var),
    CrossEntropy { logits: Var, label: usize, probs: Tensor<T> },
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a computation for one example (or batch) so it can be differentiated.
///
/// Nodes are appended in evaluation order, so every record's inputs precede it and a
/// reverse sweep over the node list is a valid reverse-topological order.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    bound: HashMap<ParamId, Var>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            bound: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A leaf value. Leaves with `requires_grad` receive gradients in [`Gradients::get`].
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    /// Binds a parameter. Repeated calls return the same node, so every use of a
    /// parameter accumulates into one gradient.
    pub fn param(&mut self, params: &ParameterSet<T>, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let v = self.push(params.value(id).clone(), Op::Param(id), true);
        self.bound.insert(id, v);
        v
    }

    /// Gathers row `row` of a parameter matrix as a column vector.
    pub fn embed_row(&mut self, params: &ParameterSet<T>, id: ParamId, row: usize) -> Var {
        let table = params.value(id);
        let value = Tensor::column(table.row_slice(row));
        self.push(value, Op::EmbedRow { param: id, row }, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::shape("matmul", sa, sb));
        }
        let value = self.value(a).matmul(self.value(b));
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn map_unary(&mut self, f: Unary, x: Var) -> Result<Var> {
        let input = self.value(x);
        if !input.all_finite() {
            return Err(Error::NonFinite {
                op: match f {
                    Unary::Tanh => "tanh",
                    Unary::Sigmoid => "sigmoid",
                },
            });
        }
        let rg = self.requires_grad(x);
        Ok(match f {
            Unary::Tanh => {
                let value = input.map(Real::tanh);
                self.push(value, Op::Tanh(x), rg)
            }
            Unary::Sigmoid => {
                let value = input.map(Real::sigmoid);
                self.push(value, Op::Sigmoid(x), rg)
            }
        })
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.map_unary(Unary::Tanh, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.map_unary(Unary::Sigmoid, x)
    }

    /// Element-wise add or multiply. `Add` also accepts a `k × 1` right operand against a
    /// `k × n` left operand and reports the broadcast it applied.
    pub fn ewise(&mut self, op: Binary, x: Var, y: Var) -> Result<(Var, Broadcast)> {
        let (sx, sy) = (self.shape(x), self.shape(y));
        let rg = self.any_grad(&[x, y]);
        if sx == sy {
            let (a, b) = (self.value(x), self.value(y));
            return Ok(match op {
                Binary::Add => {
                    let value = a.zip_map(b, |p, q| p + q);
                    (self.push(value, Op::Add(x, y), rg), Broadcast::None)
                }
                Binary::Mul => {
                    let value = a.zip_map(b, |p, q| p * q);
                    (self.push(value, Op::Mul(x, y), rg), Broadcast::None)
                }
            });
        }
        if op == Binary::Add && sy.1 == 1 && sy.0 == sx.0 {
            let (a, b) = (self.value(x), self.value(y));
            let value = Tensor::from_fn(sx.0, sx.1, |r, c| a.get(r, c) + b.get(r, 0));
            return Ok((self.push(value, Op::AddColBias(x, y), rg), Broadcast::ColumnBias));
        }
        Err(Error::shape(
            match op {
                Binary::Add => "add",
                Binary::Mul => "mul",
            },
            sx,
            sy,
        ))
    }

    pub fn add(&mut self, x: Var, y: Var) -> Result<Var> {
        self.ewise(Binary::Add, x, y).map(|(v, _)| v)
    }

    pub fn mul(&mut self, x: Var, y: Var) -> Result<Var> {
        self.ewise(Binary::Mul, x, y).map(|(v, _)| v)
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let value = self.value(x).scale(c);
        let rg = self.requires_grad(x);
        self.push(value, Op::Scale(x, c), rg)
    }

    /// Repeats a `k × 1` column `count` times.
    pub fn broadcast_cols(&mut self, v: Var, count: usize) -> Result<Var> {
        let s = self.shape(v);
        if count == 0 {
            return Err(Error::EmptySequence { op: "broadcast_cols" });
        }
        if s.1 != 1 {
            return Err(Error::shape("broadcast_cols", s, (s.0, 1)));
        }
        let col = self.value(v);
        let value = Tensor::from_fn(s.0, count, |r, _| col.get(r, 0));
        let rg = self.requires_grad(v);
        Ok(self.push(value, Op::BroadcastCols(v), rg))
    }

    /// Vertical stack of `x` over `y`.
    pub fn concat_rows(&mut self, x: Var, y: Var) -> Result<Var> {
        let (sx, sy) = (self.shape(x), self.shape(y));
        if sx.1 != sy.1 {
            return Err(Error::shape("concat_rows", sx, sy));
        }
        let mut data = Vec::with_capacity((sx.0 + sy.0) * sx.1);
        data.extend_from_slice(self.value(x).data());
        data.extend_from_slice(self.value(y).data());
        let value = Tensor::from_vec(sx.0 + sy.0, sx.1, data)?;
        let rg = self.any_grad(&[x, y]);
        Ok(self.push(value, Op::ConcatRows(x, y), rg))
    }

    /// Side-by-side placement of equally tall tensors.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::EmptySequence { op: "concat_cols" });
        };
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(Error::shape("concat_cols", self.shape(first), self.shape(p)));
            }
        }
        let total: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Tensor::zeros(rows, total);
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            for r in 0..rows {
                for c in 0..t.cols() {
                    value.set(r, offset + c, t.get(r, c));
                }
            }
            offset += t.cols();
        }
        let rg = self.any_grad(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transpose();
        let rg = self.requires_grad(x);
        self.push(value, Op::Transpose(x), rg)
    }

    /// Sum of all entries as a `1 × 1` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let rg = self.requires_grad(x);
        self.push(value, Op::Sum(x), rg)
    }

    /// Softmax over a `1 × L` row restricted to positions where `mask` is set.
    /// Masked positions come out as exact zeros.
    pub fn softmax_masked(&mut self, scores: Var, mask: &[bool]) -> Result<Var> {
        let s = self.shape(scores);
        if s.0 != 1 || s.1 != mask.len() {
            return Err(Error::shape("softmax_masked", s, (1, mask.len())));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::DegenerateMask);
        }
        let value = masked_softmax(self.value(scores).data(), mask);
        let value = Tensor::row(&value);
        let rg = self.requires_grad(scores);
        Ok(self.push(value, Op::MaskedSoftmax(scores), rg))
    }

    /// Fused, numerically stable `logsumexp(logits) − logits[label]`.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let z = self.value(logits);
        if z.rows() != 1 && z.cols() != 1 {
            return Err(Error::shape("cross_entropy", z.shape(), (1, z.len())));
        }
        if label >= z.len() {
            return Err(Error::Label {
                label,
                classes: z.len(),
            });
        }
        let data = z.data();
        let max = data.iter().copied().fold(data[0], Real::max);
        let sum: T = data.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        let loss = lse - data[label];
        let probs = Tensor::from_vec(z.rows(), z.cols(), data.iter().map(|&v| (v - lse).exp()).collect())?;
        let rg = self.requires_grad(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                label,
                probs,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let s = self.shape(loss);
        if s != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a 1x1 loss, got {}x{}",
                s.0, s.1
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; loss.0 + 1];
        let mut params = ParamGrads::new();
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads, &mut params);
            grads[id] = Some(g);
        }

        for (slot, node) in grads.iter_mut().zip(&self.nodes) {
            if !matches!(node.op, Op::Leaf) {
                *slot = None;
            }
        }
        Ok(Gradients { nodes: grads, params })
    }

    fn propagate(
        &self,
        node: &Node<T>,
        g: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
        params: &mut ParamGrads<T>,
    ) {
        let mut send = |v: Var, delta: Tensor<T>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => params.add_dense(*id, g),
            Op::EmbedRow { param, row } => params.add_row(*param, g.len(), *row, g.data()),
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    send(*a, g.matmul_t(vb));
                }
                if self.requires_grad(*b) {
                    send(*b, va.t_matmul(g));
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::AddColBias(a, b) => {
                send(*a, g.clone());
                let col: Vec<T> = (0..g.rows()).map(|r| g.row_slice(r).iter().copied().sum()).collect();
                send(*b, Tensor::column(&col));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    send(*a, g.zip_map(vb, |p, q| p * q));
                }
                if self.requires_grad(*b) {
                    send(*b, g.zip_map(va, |p, q| p * q));
                }
            }
            Op::Scale(a, c) => send(*a, g.scale(*c)),
            Op::Tanh(a) => {
                let d = g.zip_map(&node.value, |gi, t| gi * (T::one() - t * t));
                send(*a, d);
            }
            Op::Sigmoid(a) => {
                let d = g.zip_map(&node.value, |gi, s| gi * s * (T::one() - s));
                send(*a, d);
            }
            Op::BroadcastCols(a) => {
                let col: Vec<T> = (0..g.rows()).map(|r| g.row_slice(r).iter().copied().sum()).collect();
                send(*a, Tensor::column(&col));
            }
            Op::ConcatRows(a, b) => {
                let (top_rows, cols) = self.shape(*a);
                let bottom_rows = self.shape(*b).0;
                let top = Tensor::from_fn(top_rows, cols, |r, c| g.get(r, c));
                let bottom = Tensor::from_fn(bottom_rows, cols, |r, c| g.get(top_rows + r, c));
                send(*a, top);
                send(*b, bottom);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (rows, cols) = self.shape(p);
                    let piece = Tensor::from_fn(rows, cols, |r, c| g.get(r, offset + c));
                    send(p, piece);
                    offset += cols;
                }
            }
            Op::Transpose(a) => send(*a, g.transpose()),
            Op::Sum(a) => {
                let (rows, cols) = self.shape(*a);
                send(*a, Tensor::filled(rows, cols, g.item()));
            }
            Op::MaskedSoftmax(a) => {
                let y = &node.value;
                let dot: T = g.data().iter().zip(y.data()).map(|(&gi, &yi)| gi * yi).sum();
                send(*a, y.zip_map(g, |yi, gi| yi * (gi - dot)));
            }
            Op::CrossEntropy { logits, label, probs } => {
                let mut d = probs.clone();
                d.data_mut()[*label] -= T::one();
                send(*logits, d.scale(g.item()));
            }
        }
    }
}

/// Max-subtracted softmax over unmasked positions; masked entries are exactly zero.
pub(crate) fn masked_softmax<T: Real>(scores: &[T], mask: &[bool]) -> Vec<T> {
    let masked = T::from_f64(MASKED_SCORE);
    let shifted: Vec<T> = scores
        .iter()
        .zip(mask)
        .map(|(&s, &m)| if m { s } else { masked })
        .collect();
    let max = shifted.iter().copied().fold(masked, Real::max);
    let exps: Vec<T> = shifted
        .iter()
        .zip(mask)
        .map(|(&s, &m)| if m { (s - max).exp() } else { T::zero() })
        .collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    nodes: Vec<Option<Tensor<T>>>,
    pub params: ParamGrads<T>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of a leaf created with `requires_grad`.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes.get(v.0).and_then(Option::as_ref)
    }
}
