//! Reverse-mode differentiation over [`Tensor2`] values.
//!
//! A [`Tape`] records every operation of one forward pass as a node in an
//! append-only arena. Because nodes can only refer to earlier nodes, the
//! arena order is already a topological order and [`Tape::backward`] walks
//! it once in reverse. The tape is meant to be built per sample and dropped
//! after its gradients have been read.

use crate::error::{Error, Result};
use crate::numcore::{tensor::softmax_in_place, Scalar, Tensor2};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Hadamard(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Transpose(Var),
    Flatten(Var),
    ConcatCols(Var, Var),
    SoftmaxRows(Var),
    Row(Var, usize),
    StackRows(Vec<Var>),
    Sum(Var),
    /// Cached class probabilities of the logits row.
    CrossEntropy(Var, usize, Vec<f64>),
}

#[derive(Debug)]
struct Node<T: Scalar> {
    value: Tensor2<T>,
    op: Op,
    /// False for constants and for nodes computed only from constants.
    tracked: bool,
    grad: Option<Tensor2<T>>,
}

#[derive(Debug)]
pub struct Tape<T: Scalar = f64> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor2<T>, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            tracked,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// Differentiable input, e.g. a trainable parameter.
    pub fn leaf(&mut self, value: Tensor2<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor2<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor2<T> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` call's output with respect to `v`.
    /// Nodes the output does not depend on report zeros.
    pub fn grad(&self, v: Var) -> Tensor2<T> {
        let node = &self.nodes[v.0];
        node.grad
            .clone()
            .unwrap_or_else(|| Tensor2::zeros(node.value.rows(), node.value.cols()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::MatMul(a, b), tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Add(a, b), tracked))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Hadamard(a, b), tracked))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).tanh_elem();
        let tracked = self.tracked(x);
        self.push(value, Op::Tanh(x), tracked)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).sigmoid_elem();
        let tracked = self.tracked(x);
        self.push(value, Op::Sigmoid(x), tracked)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transpose();
        let tracked = self.tracked(x);
        self.push(value, Op::Transpose(x), tracked)
    }

    pub fn flatten(&mut self, x: Var) -> Var {
        let value = self.value(x).flatten_row_major();
        let tracked = self.tracked(x);
        self.push(value, Op::Flatten(x), tracked)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).concat_cols(self.value(b))?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::ConcatCols(a, b), tracked))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let value = self.value(x).softmax_rows();
        let tracked = self.tracked(x);
        self.push(value, Op::SoftmaxRows(x), tracked)
    }

    /// Row `r` of `x` as a 1×cols node.
    pub fn row(&mut self, x: Var, r: usize) -> Result<Var> {
        let value = self.value(x).row_tensor(r)?;
        let tracked = self.tracked(x);
        Ok(self.push(value, Op::Row(x, r), tracked))
    }

    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let value = {
            let refs: Vec<&Tensor2<T>> = rows.iter().map(|&v| self.value(v)).collect();
            Tensor2::stack_rows(&refs)?
        };
        let tracked = rows.iter().any(|&v| self.tracked(v));
        Ok(self.push(value, Op::StackRows(rows.to_vec()), tracked))
    }

    /// Sum of all entries as a 1×1 node.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).sum();
        let tracked = self.tracked(x);
        self.push(Tensor2::filled(1, 1, total), Op::Sum(x), tracked)
    }

    /// `-log softmax(logits)[label]` for a 1×C logits row, computed with
    /// log-sum-exp so large logits do not overflow.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let row = self.value(logits);
        if row.rows() != 1 {
            return Err(Error::Contract(format!(
                "cross_entropy expects a 1xC logits row, got {:?}",
                row.shape()
            )));
        }
        if label >= row.cols() {
            return Err(Error::Contract(format!(
                "label index {label} out of range for {} classes",
                row.cols()
            )));
        }
        let logits64: Vec<f64> = row.data().iter().map(|v| v.to_f64_lossy()).collect();
        let max = logits64.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits64.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - logits64[label];
        let mut probs = logits64;
        softmax_in_place(&mut probs);
        let tracked = self.tracked(logits);
        Ok(self.push(
            Tensor2::filled(1, 1, T::of(loss)),
            Op::CrossEntropy(logits, label, probs),
            tracked,
        ))
    }

    /// Propagates d(output)/d(node) to every node `output` depends on.
    ///
    /// `output` must be a 1×1 node. Gradients from earlier calls are cleared.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        let shape = self.value(output).shape();
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward requires a scalar (1x1) output, got {shape:?}"
            )));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[output.0].grad = Some(Tensor2::filled(1, 1, T::one()));

        for i in (0..=output.0).rev() {
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            if self.nodes[i].tracked {
                for (parent, contribution) in self.local_grads(i, &g)? {
                    if !self.nodes[parent.0].tracked {
                        continue;
                    }
                    let slot = &mut self.nodes[parent.0].grad;
                    match slot {
                        Some(acc) => {
                            for (a, c) in acc.data_mut().iter_mut().zip(contribution.data()) {
                                *a += *c;
                            }
                        }
                        None => *slot = Some(contribution),
                    }
                }
            }
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn local_grads(&self, i: usize, g: &Tensor2<T>) -> Result<Vec<(Var, Tensor2<T>)>> {
        let node = &self.nodes[i];
        let y = &node.value;
        let out = match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let mut v = Vec::with_capacity(2);
                if self.tracked(*a) {
                    v.push((*a, g.matmul(&self.value(*b).transpose())?));
                }
                if self.tracked(*b) {
                    v.push((*b, self.value(*a).transpose().matmul(g)?));
                }
                v
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Hadamard(a, b) => vec![
                (*a, g.hadamard(self.value(*b))?),
                (*b, g.hadamard(self.value(*a))?),
            ],
            Op::Tanh(x) => {
                let d = y.map(|t| T::one() - t * t);
                vec![(*x, g.hadamard(&d)?)]
            }
            Op::Sigmoid(x) => {
                let d = y.map(|s| s * (T::one() - s));
                vec![(*x, g.hadamard(&d)?)]
            }
            Op::Transpose(x) => vec![(*x, g.transpose())],
            Op::Flatten(x) => {
                let (r, c) = self.value(*x).shape();
                vec![(*x, g.reshape(r, c)?)]
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let mut ga = Vec::with_capacity(g.rows() * ca);
                let mut gb = Vec::with_capacity(g.rows() * cb);
                for r in 0..g.rows() {
                    let row = g.row(r);
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                vec![
                    (*a, Tensor2::from_vec(g.rows(), ca, ga)?),
                    (*b, Tensor2::from_vec(g.rows(), cb, gb)?),
                ]
            }
            Op::SoftmaxRows(x) => {
                let mut dx = y.clone();
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    for ((d, &yi), &gi) in dx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *d = yi * (gi - dot);
                    }
                }
                vec![(*x, dx)]
            }
            Op::Row(x, r) => {
                let (rows, cols) = self.value(*x).shape();
                let mut dx = Tensor2::zeros(rows, cols);
                dx.row_mut(*r).copy_from_slice(g.data());
                vec![(*x, dx)]
            }
            Op::StackRows(parts) => parts
                .iter()
                .enumerate()
                .filter(|(_, p)| self.tracked(**p))
                .map(|(r, p)| Ok((*p, g.row_tensor(r)?)))
                .collect::<Result<Vec<_>>>()?,
            Op::Sum(x) => {
                let (rows, cols) = self.value(*x).shape();
                vec![(*x, Tensor2::filled(rows, cols, g.get(0, 0)))]
            }
            Op::CrossEntropy(x, label, probs) => {
                let scale = g.get(0, 0);
                let mut d: Vec<T> = probs.iter().map(|&p| T::of(p) * scale).collect();
                d[*label] -= scale;
                vec![(*x, Tensor2::from_vec(1, d.len(), d)?)]
            }
        };
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor2 {
        Tensor2::from_rows(rows).unwrap()
    }

    #[test]
    fn sum_gradient_is_all_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[&[1.0, -2.0], &[3.0, 0.5]]));
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x), Tensor2::filled(2, 2, 1.0));
    }

    #[test]
    fn backward_on_non_scalar_is_contract_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor2::<f64>::zeros(2, 2));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn fan_out_accumulates() {
        // loss = sum(x ⊙ x) → grad 2x
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[&[1.0, 2.0, -3.0]]));
        let sq = tape.hadamard(x, x).unwrap();
        let s = tape.sum(sq);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).data(), &[2.0, 4.0, -6.0]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(t(&[&[1.0, 2.0]]));
        let w = tape.leaf(t(&[&[3.0], &[4.0]]));
        let y = tape.matmul(c, w).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(c), Tensor2::zeros(1, 2));
        assert_eq!(tape.grad(w).data(), &[1.0, 2.0]);
    }

    #[test]
    fn cross_entropy_values() {
        let mut tape: Tape = Tape::new();
        let z = tape.leaf(Tensor2::zeros(1, 10));
        let l = tape.cross_entropy(z, 3).unwrap();
        assert!((tape.value(l).get(0, 0) - 10f64.ln()).abs() < 1e-12);

        let z = tape.leaf(t(&[&[1000.0, 0.0]]));
        let l = tape.cross_entropy(z, 0).unwrap();
        let v = tape.value(l).get(0, 0);
        assert!(v.is_finite() && v.abs() < 1e-12);

        let z = tape.leaf(Tensor2::zeros(1, 3));
        let l = tape.cross_entropy(z, 2).unwrap();
        assert!((tape.value(l).get(0, 0) - 1.098612).abs() < 1e-6);

        assert!(matches!(tape.cross_entropy(z, 3), Err(Error::Contract(_))));
    }

    #[test]
    fn repeated_backward_resets_gradients() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[&[1.0, 2.0]]));
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).data(), &[1.0, 1.0]);
    }
}
