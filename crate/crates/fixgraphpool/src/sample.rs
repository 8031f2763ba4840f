//! Random fixation graphs for property checks and smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sagaze_core::graph::{edge_weight, FixationGraph, GraphEdge, GraphNode, GRAPH_FORMAT_VERSION};
use sagaze_core::SaLabel;

/// A graph of `n` fixations with a temporal chain and random bidirectional
/// spatial edges, all features drawn from plausible ranges.
pub fn random_graph(n: usize, label: SaLabel, seed: u64) -> FixationGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut onset = 0.0;
    let nodes: Vec<GraphNode> = (0..n)
        .map(|_| {
            onset += rng.random_range(0.1..0.6);
            let duration = rng.random_range(0.06..0.5);
            GraphNode {
                features: [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.8..0.2),
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.05..0.05),
                    duration,
                    (rng.random::<f64>() < 0.3) as u8 as f64,
                ],
                onset,
                point: [rng.random_range(-0.4..0.4), rng.random_range(-0.2..0.2)],
            }
        })
        .collect();
    let mut pairs: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    for i in 0..n {
        for j in i + 2..n {
            if rng.random::<f64>() < 0.25 {
                pairs.push((i, j));
                pairs.push((j, i));
            }
        }
    }
    pairs.sort_unstable();
    let edges = pairs
        .into_iter()
        .map(|(src, dst)| {
            let (a, b) = (nodes[src].point, nodes[dst].point);
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            GraphEdge {
                src,
                dst,
                features: [nodes[dst].onset - nodes[src].onset, d, nodes[dst].features[6]],
                weight: edge_weight(d, 2.0),
            }
        })
        .collect();
    FixationGraph { version: GRAPH_FORMAT_VERSION, nodes, edges, label }
}
