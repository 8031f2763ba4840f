use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::NnError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Identity => x,
        }
    }
}

/// Directed weighted edge for message passing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcnEdge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Affine map `x W + b` with `W: in x out` and `b: 1 x out`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let weight = store.add_uniform(format!("{name}.weight"), in_dim, out_dim, in_dim, rng);
        let bias = store.add_uniform(format!("{name}.bias"), 1, out_dim, in_dim, rng);
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, NnError> {
        if tape.value(x).cols() != self.in_dim {
            return Err(NnError::ShapeMismatch(format!(
                "linear expects {} inputs, got {}",
                self.in_dim,
                tape.value(x).cols()
            )));
        }
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w);
        Ok(tape.add_row(xw, b))
    }
}

/// Symmetric-normalized propagation coefficients with unit self-loops.
///
/// `deg(v)` is the total incoming weight of `v` including its self-loop and
/// each `u -> v` edge contributes `w / sqrt(deg(u) deg(v))`.
pub fn gcn_coefficients(n: usize, edges: &[GcnEdge]) -> Result<Vec<(usize, usize, f64)>, NnError> {
    let mut deg = vec![1.0; n];
    for e in edges {
        if e.src >= n || e.dst >= n {
            return Err(NnError::ShapeMismatch(format!("edge {}->{} outside {n} nodes", e.src, e.dst)));
        }
        if !(e.weight > 0.0) {
            return Err(NnError::NonPositiveWeight(e.weight));
        }
        deg[e.dst] += e.weight;
    }
    let mut out: Vec<(usize, usize, f64)> = (0..n).map(|v| (v, v, 1.0 / deg[v])).collect();
    out.extend(edges.iter().map(|e| (e.src, e.dst, e.weight / (deg[e.src] * deg[e.dst]).sqrt())));
    Ok(out)
}

/// One weighted GCN layer: `act(Â x W + b)`.
pub fn gcn_layer(
    tape: &mut Tape,
    x: Var,
    edges: &[GcnEdge],
    weight: Var,
    bias: Var,
    act: Activation,
) -> Result<Var, NnError> {
    let (n, f) = (tape.value(x).rows(), tape.value(x).cols());
    let w = tape.value(weight).shape();
    let b = tape.value(bias).shape();
    if w[0] != f || b != [1, w[1]] {
        return Err(NnError::ShapeMismatch(format!("gcn input {n}x{f}, weight {w:?}, bias {b:?}")));
    }
    let coef = gcn_coefficients(n, edges)?;
    let agg = tape.propagate(x, coef, n);
    let lin = tape.matmul(agg, weight);
    let out = tape.add_row(lin, bias);
    Ok(act.apply(tape, out))
}

fn check_partition(len: usize, groups: &[Vec<usize>]) -> Result<(), NnError> {
    let mut seen = vec![false; len];
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(NnError::EmptyGroup(g));
        }
        for &i in members {
            if i >= len || seen[i] {
                return Err(NnError::InvalidPartition(i));
            }
            seen[i] = true;
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(NnError::InvalidPartition(i)),
        None => Ok(()),
    }
}

/// Group score indices by a key such as the source node of each edge.
/// Groups are ordered by key, members by index.
pub fn groups_by_key(keys: &[usize]) -> Vec<Vec<usize>> {
    let n = keys.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); n];
    for (i, &k) in keys.iter().enumerate() {
        groups[k].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

/// Max-shifted softmax within each group of a partition of `scores`.
pub fn grouped_softmax(scores: &[f64], groups: &[Vec<usize>]) -> Result<Vec<f64>, NnError> {
    check_partition(scores.len(), groups)?;
    let mut out = vec![0.0; scores.len()];
    for g in groups {
        let max = g.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = g.iter().map(|&i| (scores[i] - max).exp()).sum();
        for &i in g {
            out[i] = (scores[i] - max).exp() / sum;
        }
    }
    Ok(out)
}

/// Tape version of [`grouped_softmax`] for an `E x 1` score column.
pub fn grouped_softmax_var(tape: &mut Tape, scores: Var, groups: Vec<Vec<usize>>) -> Result<Var, NnError> {
    let shape = tape.value(scores).shape();
    if shape[1] != 1 {
        return Err(NnError::ShapeMismatch(format!("scores must be a column, got {shape:?}")));
    }
    check_partition(shape[0], &groups)?;
    Ok(tape.grouped_softmax(scores, groups))
}
