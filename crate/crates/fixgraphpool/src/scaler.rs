use serde::{Deserialize, Serialize};

use sagaze_core::graph::{EDGE_FEATURES, NODE_FEATURES};
use sagaze_core::FixationGraph;

/// Continuous node features (azimuth, elevation, eye center, duration).
pub const SCALED_NODE_FEATURES: usize = 6;
/// Continuous edge features (time gap, distance).
pub const SCALED_EDGE_FEATURES: usize = 2;

/// Per-feature standardization fitted on training graphs. Binary flags are
/// left untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphScaler {
    pub node_mean: [f64; SCALED_NODE_FEATURES],
    pub node_std: [f64; SCALED_NODE_FEATURES],
    pub edge_mean: [f64; SCALED_EDGE_FEATURES],
    pub edge_std: [f64; SCALED_EDGE_FEATURES],
}

impl Default for GraphScaler {
    fn default() -> Self {
        Self {
            node_mean: [0.0; SCALED_NODE_FEATURES],
            node_std: [1.0; SCALED_NODE_FEATURES],
            edge_mean: [0.0; SCALED_EDGE_FEATURES],
            edge_std: [1.0; SCALED_EDGE_FEATURES],
        }
    }
}

fn moments<const K: usize>(rows: impl Iterator<Item = [f64; K]>) -> ([f64; K], [f64; K]) {
    let mut n = 0usize;
    let mut sum = [0.0; K];
    let mut sq = [0.0; K];
    for r in rows {
        n += 1;
        for k in 0..K {
            sum[k] += r[k];
            sq[k] += r[k] * r[k];
        }
    }
    let mut mean = [0.0; K];
    let mut std = [1.0; K];
    if n > 0 {
        for k in 0..K {
            mean[k] = sum[k] / n as f64;
            let var = (sq[k] / n as f64 - mean[k] * mean[k]).max(0.0);
            std[k] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
    }
    (mean, std)
}

impl GraphScaler {
    pub fn fit<'a>(graphs: impl IntoIterator<Item = &'a FixationGraph> + Clone) -> Self {
        let (node_mean, node_std) = moments(
            graphs.clone().into_iter().flat_map(|g| g.nodes.iter().map(|n| std::array::from_fn(|k| n.features[k]))),
        );
        let (edge_mean, edge_std) =
            moments(graphs.into_iter().flat_map(|g| g.edges.iter().map(|e| std::array::from_fn(|k| e.features[k]))));
        Self { node_mean, node_std, edge_mean, edge_std }
    }

    pub fn node(&self, f: &[f64; NODE_FEATURES]) -> [f64; NODE_FEATURES] {
        let mut out = *f;
        for k in 0..SCALED_NODE_FEATURES {
            out[k] = (f[k] - self.node_mean[k]) / self.node_std[k];
        }
        out
    }

    pub fn edge(&self, f: &[f64; EDGE_FEATURES]) -> [f64; EDGE_FEATURES] {
        let mut out = *f;
        for k in 0..SCALED_EDGE_FEATURES {
            out[k] = (f[k] - self.edge_mean[k]) / self.edge_std[k];
        }
        out
    }
}
