//! Reverse-mode automatic differentiation over a recorded tape of matrix ops.
//!
//! Each op appends a node holding its forward value; `backward` walks the
//! tape from the end and accumulates adjoints into the op inputs. Inputs
//! always precede their consumers, so the tape is a topological order.

use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::NnError;

/// Handle of a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    AddScalar(usize),
    Scale(usize, f64),
    Relu(usize),
    ScaleRows(usize, usize),
    GatherRows(usize, Vec<usize>),
    ScatterRows(usize, Vec<usize>),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    Propagate(usize, Vec<(usize, usize, f64)>),
    GroupedSoftmax(usize, Vec<Vec<usize>>),
    MeanRows(usize),
    SumSquares(usize),
    SoftmaxCrossEntropy { logits: usize, targets: Vec<usize>, probs: Tensor },
}

impl Op {
    fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Constant | Op::Param(_) => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::ScaleRows(a, b) => vec![*a, *b],
            Op::AddScalar(a)
            | Op::Scale(a, _)
            | Op::Relu(a)
            | Op::GatherRows(a, _)
            | Op::ScatterRows(a, _)
            | Op::Propagate(a, _)
            | Op::GroupedSoftmax(a, _)
            | Op::MeanRows(a)
            | Op::SumSquares(a) => vec![*a],
            Op::SoftmaxCrossEntropy { logits, .. } => vec![*logits],
            Op::ConcatCols(xs) | Op::ConcatRows(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every tape value after a backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Add parameter adjoints into the store's gradient slots.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for &(id, node) in &self.params {
            if let Some(g) = &self.grads[node] {
                store.grad_mut(id).add_assign(g);
            }
        }
    }
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Record a trainable parameter leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a.0, b.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a.0, b.0))
    }

    /// `x + 1·b` with `b` a 1xC row broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!(bias.rows(), 1, "bias must be a row vector");
        assert_eq!(bias.cols(), self.value(x).cols(), "bias width");
        let mut v = self.value(x).clone();
        let cols = v.cols();
        for (i, x) in v.data_mut().iter_mut().enumerate() {
            *x += bias.data()[i % cols];
        }
        self.push(v, Op::AddRow(x.0, b.0))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x).map(|a| a + c);
        self.push(v, Op::AddScalar(x.0))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x).map(|a| a * c);
        self.push(v, Op::Scale(x.0, c))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|a| a.max(0.0));
        self.push(v, Op::Relu(x.0))
    }

    /// Multiply row `i` of `x` (RxC) by `s[i]` (s is Rx1).
    pub fn scale_rows(&mut self, x: Var, s: Var) -> Var {
        let (xv, sv) = (self.value(x), self.value(s));
        assert_eq!(sv.shape(), [xv.rows(), 1], "row scale shape");
        let mut v = xv.clone();
        for r in 0..v.rows() {
            let k = sv.data()[r];
            v.row_mut(r).iter_mut().for_each(|a| *a *= k);
        }
        self.push(v, Op::ScaleRows(x.0, s.0))
    }

    /// Rows `x[idx[0]], x[idx[1]], ...`.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Var {
        let xv = self.value(x);
        let mut v = Tensor::zeros(idx.len(), xv.cols());
        for (r, &i) in idx.iter().enumerate() {
            v.row_mut(r).copy_from_slice(xv.row(i));
        }
        self.push(v, Op::GatherRows(x.0, idx.to_vec()))
    }

    /// Output row `target[i]` accumulates row `i` of `x`.
    pub fn scatter_rows(&mut self, x: Var, target: &[usize], out_rows: usize) -> Var {
        let xv = self.value(x);
        assert_eq!(target.len(), xv.rows(), "scatter target length");
        let mut v = Tensor::zeros(out_rows, xv.cols());
        for (r, &t) in target.iter().enumerate() {
            for (o, a) in v.row_mut(t).iter_mut().zip(xv.row(r)) {
                *o += a;
            }
        }
        self.push(v, Op::ScatterRows(x.0, target.to_vec()))
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Var {
        let rows = self.value(xs[0]).rows();
        let cols: usize = xs.iter().map(|x| self.value(*x).cols()).sum();
        let mut v = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for x in xs {
                let part = self.value(*x);
                assert_eq!(part.rows(), rows, "concat_cols row count");
                v.row_mut(r)[off..off + part.cols()].copy_from_slice(part.row(r));
                off += part.cols();
            }
        }
        self.push(v, Op::ConcatCols(xs.iter().map(|x| x.0).collect()))
    }

    pub fn concat_rows(&mut self, xs: &[Var]) -> Var {
        let cols = self.value(xs[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for x in xs {
            let part = self.value(*x);
            assert_eq!(part.cols(), cols, "concat_rows column count");
            data.extend_from_slice(part.data());
            rows += part.rows();
        }
        let v = Tensor::from_vec(rows, cols, data).expect("consistent shape");
        self.push(v, Op::ConcatRows(xs.iter().map(|x| x.0).collect()))
    }

    /// Sparse weighted aggregation: `out[dst] += coef · x[src]` for each
    /// `(src, dst, coef)`; the output has `out_rows` rows.
    pub fn propagate(&mut self, x: Var, entries: Vec<(usize, usize, f64)>, out_rows: usize) -> Var {
        let xv = self.value(x);
        let mut v = Tensor::zeros(out_rows, xv.cols());
        for &(s, d, c) in &entries {
            for (o, a) in v.row_mut(d).iter_mut().zip(xv.row(s)) {
                *o += c * a;
            }
        }
        self.push(v, Op::Propagate(x.0, entries))
    }

    /// Softmax of a column vector within each group of row indices.
    pub fn grouped_softmax(&mut self, x: Var, groups: Vec<Vec<usize>>) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.cols(), 1, "grouped softmax expects a column vector");
        let mut v = Tensor::zeros(xv.rows(), 1);
        for g in &groups {
            let max = g.iter().map(|&i| xv.data()[i]).fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = g.iter().map(|&i| (xv.data()[i] - max).exp()).sum();
            for &i in g {
                v.data_mut()[i] = (xv.data()[i] - max).exp() / sum;
            }
        }
        self.push(v, Op::GroupedSoftmax(x.0, groups))
    }

    /// Column means: RxC -> 1xC.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        assert!(xv.rows() > 0, "mean of zero rows");
        let mut v = Tensor::zeros(1, xv.cols());
        for r in 0..xv.rows() {
            for (o, a) in v.data_mut().iter_mut().zip(xv.row(r)) {
                *o += a;
            }
        }
        let n = xv.rows() as f64;
        v.data_mut().iter_mut().for_each(|a| *a /= n);
        self.push(v, Op::MeanRows(x.0))
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().map(|a| a * a).sum();
        self.push(Tensor::scalar(s), Op::SumSquares(x.0))
    }

    /// Mean softmax cross-entropy of BxK logits against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.rows(), targets.len(), "one target per row");
        assert!(!targets.is_empty(), "empty batch");
        let mut probs = Tensor::zeros(lv.rows(), lv.cols());
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|a| (a - max).exp()).sum::<f64>().ln();
            loss += lse - row[t];
            for (p, a) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (a - lse).exp();
            }
        }
        let v = Tensor::scalar(loss / targets.len() as f64);
        self.push(v, Op::SoftmaxCrossEntropy { logits: logits.0, targets: targets.to_vec(), probs })
    }

    /// Every op input must precede its node.
    pub fn validate(&self) -> Result<(), NnError> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.op.inputs().iter().any(|&j| j >= i) {
                return Err(NnError::GraphCycle(i));
            }
        }
        Ok(())
    }

    /// Backpropagate from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NnError> {
        self.validate()?;
        let lv = self.value(loss);
        if lv.shape() != [1, 1] {
            return Err(NnError::ShapeMismatch(format!("loss must be 1x1, got {:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut params = Vec::new();

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if let Op::Param(id) = node.op {
                params.push((id, i));
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        params.reverse();
        Ok(Gradients { grads, params })
    }

    fn backprop_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |j: usize, delta: Tensor| match &mut grads[j] {
            Some(t) => t.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        let val = |j: usize| &self.nodes[j].value;
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                acc(*a, g.matmul_t(val(*b)));
                acc(*b, val(*a).t_matmul(g));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(x, b) => {
                let mut gb = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    gb.add_assign(&Tensor::from_vec(1, g.cols(), g.row(r).to_vec()).expect("row"));
                }
                acc(*x, g.clone());
                acc(*b, gb);
            }
            Op::AddScalar(x) => acc(*x, g.clone()),
            Op::Scale(x, c) => acc(*x, g.map(|a| a * c)),
            Op::Relu(x) => {
                let xv = val(*x);
                let mut d = g.clone();
                for (o, &a) in d.data_mut().iter_mut().zip(xv.data()) {
                    if a <= 0.0 {
                        *o = 0.0;
                    }
                }
                acc(*x, d);
            }
            Op::ScaleRows(x, s) => {
                let (xv, sv) = (val(*x), val(*s));
                let mut gx = g.clone();
                let mut gs = Tensor::zeros(sv.rows(), 1);
                for r in 0..xv.rows() {
                    let k = sv.data()[r];
                    gs.data_mut()[r] = g.row(r).iter().zip(xv.row(r)).map(|(a, b)| a * b).sum();
                    gx.row_mut(r).iter_mut().for_each(|a| *a *= k);
                }
                acc(*x, gx);
                acc(*s, gs);
            }
            Op::GatherRows(x, idx) => {
                let xv = val(*x);
                let mut d = Tensor::zeros(xv.rows(), xv.cols());
                for (r, &i) in idx.iter().enumerate() {
                    for (o, a) in d.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += a;
                    }
                }
                acc(*x, d);
            }
            Op::ScatterRows(x, target) => {
                let xv = val(*x);
                let mut d = Tensor::zeros(xv.rows(), xv.cols());
                for (r, &t) in target.iter().enumerate() {
                    d.row_mut(r).copy_from_slice(g.row(t));
                }
                acc(*x, d);
            }
            Op::ConcatCols(xs) => {
                let mut off = 0;
                for &x in xs {
                    let xv = val(x);
                    let mut d = Tensor::zeros(xv.rows(), xv.cols());
                    for r in 0..xv.rows() {
                        d.row_mut(r).copy_from_slice(&g.row(r)[off..off + xv.cols()]);
                    }
                    off += xv.cols();
                    acc(x, d);
                }
            }
            Op::ConcatRows(xs) => {
                let mut off = 0;
                for &x in xs {
                    let xv = val(x);
                    let n = xv.len();
                    let d = Tensor::from_vec(xv.rows(), xv.cols(), g.data()[off..off + n].to_vec()).expect("row slice");
                    off += n;
                    acc(x, d);
                }
            }
            Op::Propagate(x, entries) => {
                let xv = val(*x);
                let mut d = Tensor::zeros(xv.rows(), xv.cols());
                for &(s, t, c) in entries {
                    for (o, a) in d.row_mut(s).iter_mut().zip(g.row(t)) {
                        *o += c * a;
                    }
                }
                acc(*x, d);
            }
            Op::GroupedSoftmax(x, groups) => {
                let y = &node.value;
                let mut d = Tensor::zeros(y.rows(), 1);
                for grp in groups {
                    let dot: f64 = grp.iter().map(|&i| y.data()[i] * g.data()[i]).sum();
                    for &i in grp {
                        d.data_mut()[i] = y.data()[i] * (g.data()[i] - dot);
                    }
                }
                acc(*x, d);
            }
            Op::MeanRows(x) => {
                let xv = val(*x);
                let n = xv.rows() as f64;
                let mut d = Tensor::zeros(xv.rows(), xv.cols());
                for r in 0..xv.rows() {
                    for (o, a) in d.row_mut(r).iter_mut().zip(g.data()) {
                        *o = a / n;
                    }
                }
                acc(*x, d);
            }
            Op::SumSquares(x) => {
                let k = 2.0 * g.item();
                acc(*x, val(*x).map(|a| k * a));
            }
            Op::SoftmaxCrossEntropy { logits, targets, probs } => {
                let scale = g.item() / targets.len() as f64;
                let mut d = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    d.row_mut(r)[t] -= 1.0;
                }
                d.data_mut().iter_mut().for_each(|a| *a *= scale);
                acc(*logits, d);
            }
        }
    }
}
