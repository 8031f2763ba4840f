//! Edge scoring and greedy edge contraction.

use std::collections::{BTreeMap, HashMap};

use sagaze_nn::layers::{grouped_softmax, groups_by_key};

/// Directed edge of a pooled graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledEdge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Normalized scores: softmax of raw scores among edges sharing a source,
/// plus `c`.
pub fn edge_scores(raw: &[f64], sources: &[usize], c: f64) -> Vec<f64> {
    let groups = groups_by_key(sources);
    grouped_softmax(raw, &groups).expect("source groups partition the edges").into_iter().map(|s| s + c).collect()
}

/// Edge indices by descending score, ties by ascending `(src, dst)`.
pub fn contraction_order(edges: &[(usize, usize)], scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(edges[a].cmp(&edges[b])));
    order
}

/// Which edges contract and how old nodes and edges map onto the pooled
/// graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionPlan {
    /// Old node to pooled node; pooled ids follow the smallest member.
    pub merge_map: Vec<usize>,
    pub num_nodes: usize,
    /// Contracted edge indices in the order they were chosen.
    pub contracted: Vec<usize>,
    /// For each old node, the contracted edge whose score scales it.
    pub node_scale: Vec<Option<usize>>,
    /// Edges whose features flow into a merged node: each contracted edge
    /// and its reverse when present, with the receiving pooled node.
    pub edge_terms: Vec<(usize, usize)>,
    pub edges: Vec<PooledEdge>,
    /// Old edge indices combined into each pooled edge.
    pub edge_members: Vec<Vec<usize>>,
}

pub fn plan_contraction(
    num_nodes: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
    scores: &[f64],
) -> ContractionPlan {
    assert_eq!(edges.len(), scores.len(), "one score per edge");
    assert_eq!(edges.len(), weights.len(), "one weight per edge");
    let mut partner: Vec<Option<usize>> = vec![None; num_nodes];
    let mut node_scale = vec![None; num_nodes];
    let mut contracted = Vec::new();
    for k in contraction_order(edges, scores) {
        let (v, u) = edges[k];
        if v != u && partner[v].is_none() && partner[u].is_none() {
            partner[v] = Some(u);
            partner[u] = Some(v);
            node_scale[v] = Some(k);
            node_scale[u] = Some(k);
            contracted.push(k);
        }
    }

    let mut merge_map = vec![usize::MAX; num_nodes];
    let mut next = 0;
    for i in 0..num_nodes {
        if merge_map[i] != usize::MAX {
            continue;
        }
        merge_map[i] = next;
        if let Some(p) = partner[i] {
            merge_map[p] = next;
        }
        next += 1;
    }

    let lookup: HashMap<(usize, usize), usize> = edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
    let mut edge_terms = Vec::new();
    for &k in &contracted {
        let (v, u) = edges[k];
        edge_terms.push((k, merge_map[v]));
        if let Some(&r) = lookup.get(&(u, v)) {
            edge_terms.push((r, merge_map[v]));
        }
    }

    let mut grouped: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (k, &(s, d)) in edges.iter().enumerate() {
        let key = (merge_map[s], merge_map[d]);
        if key.0 != key.1 {
            grouped.entry(key).or_default().push(k);
        }
    }
    let mut pooled = Vec::with_capacity(grouped.len());
    let mut members = Vec::with_capacity(grouped.len());
    for ((src, dst), ks) in grouped {
        pooled.push(PooledEdge { src, dst, weight: ks.iter().map(|&k| weights[k]).sum() });
        members.push(ks);
    }

    ContractionPlan {
        merge_map,
        num_nodes: next,
        contracted,
        node_scale,
        edge_terms,
        edges: pooled,
        edge_members: members,
    }
}

/// Numeric pooled graph, as produced by one contraction step.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledGraph {
    pub node_features: Vec<Vec<f64>>,
    pub edges: Vec<PooledEdge>,
    pub edge_features: Vec<Vec<f64>>,
    pub merge_map: Vec<usize>,
    pub contracted: Vec<usize>,
}

/// Contract edges of a graph with hidden node features `h` and edge
/// features `he` under normalized `scores`.
pub fn contract_edges(h: &[Vec<f64>], he: &[Vec<f64>], edges: &[PooledEdge], scores: &[f64]) -> PooledGraph {
    let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.src, e.dst)).collect();
    let weights: Vec<f64> = edges.iter().map(|e| e.weight).collect();
    let plan = plan_contraction(h.len(), &pairs, &weights, scores);
    let dim = h.first().map_or(0, Vec::len);
    let mut nodes = vec![vec![0.0; dim]; plan.num_nodes];
    for (i, row) in h.iter().enumerate() {
        let k = plan.node_scale[i].map_or(1.0, |e| scores[e]);
        for (o, x) in nodes[plan.merge_map[i]].iter_mut().zip(row) {
            *o += k * x;
        }
    }
    for &(e, m) in &plan.edge_terms {
        for (o, x) in nodes[m].iter_mut().zip(&he[e]) {
            *o += scores[e] * x;
        }
    }
    let edim = he.first().map_or(0, Vec::len);
    let edge_features = plan
        .edge_members
        .iter()
        .map(|ks| {
            let mut f = vec![0.0; edim];
            for &k in ks {
                f.iter_mut().zip(&he[k]).for_each(|(o, x)| *o += x);
            }
            f
        })
        .collect();
    PooledGraph {
        node_features: nodes,
        edges: plan.edges,
        edge_features,
        merge_map: plan.merge_map,
        contracted: plan.contracted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(src: usize, dst: usize) -> PooledEdge {
        PooledEdge { src, dst, weight: 1.0 }
    }

    #[test]
    fn singleton_and_pair_scores() {
        assert_eq!(edge_scores(&[3.7], &[0], 0.5), vec![1.5]);
        assert_eq!(edge_scores(&[0.2, 0.2], &[4, 4], 0.5), vec![1.0, 1.0]);
    }

    #[test]
    fn scores_ignore_per_source_shift() {
        let raw = [0.3, -1.2, 2.0, 0.7];
        let src = [0, 0, 1, 0];
        let a = edge_scores(&raw, &src, 0.5);
        let shifted: Vec<f64> = raw.iter().zip(&src).map(|(r, &s)| if s == 0 { r + 4.25 } else { *r }).collect();
        let b = edge_scores(&shifted, &src, 0.5);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn two_nodes_merge_into_one() {
        let h = vec![vec![1.0, 2.0], vec![3.0, -1.0]];
        let he = vec![vec![0.5, 0.5]];
        let p = contract_edges(&h, &he, &[e(0, 1)], &[1.5]);
        assert_eq!(p.node_features, vec![vec![(1.0 + 3.0 + 0.5) * 1.5, (2.0 - 1.0 + 0.5) * 1.5]]);
        assert!(p.edges.is_empty());
        assert_eq!(p.merge_map, vec![0, 0]);
    }

    #[test]
    fn reverse_edge_adds_its_own_term() {
        let h = vec![vec![1.0], vec![2.0]];
        let he = vec![vec![10.0], vec![100.0]];
        let p = contract_edges(&h, &he, &[e(0, 1), e(1, 0)], &[1.5, 1.2]);
        assert_eq!(p.node_features, vec![vec![(1.0 + 2.0 + 10.0) * 1.5 + 100.0 * 1.2]]);
    }

    #[test]
    fn path_contracts_best_edge_only() {
        let h = vec![vec![1.0], vec![2.0], vec![4.0]];
        let he = vec![vec![0.25], vec![0.75]];
        let edges = [PooledEdge { src: 0, dst: 1, weight: 0.9 }, PooledEdge { src: 1, dst: 2, weight: 0.6 }];
        let p = contract_edges(&h, &he, &edges, &[1.5, 1.4]);
        assert_eq!(p.contracted, vec![0]);
        assert_eq!(p.merge_map, vec![0, 0, 1]);
        assert_eq!(p.node_features, vec![vec![(1.0 + 2.0 + 0.25) * 1.5], vec![4.0]]);
        assert_eq!(p.edges, vec![PooledEdge { src: 0, dst: 1, weight: 0.6 }]);
        assert_eq!(p.edge_features, vec![vec![0.75]]);
    }

    #[test]
    fn square_pools_to_a_perfect_matching() {
        // a-b-c-d-a, bidirectional, all equal
        let mut edges = Vec::new();
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            edges.push(e(a, b));
            edges.push(e(b, a));
        }
        edges.sort_by_key(|x| (x.src, x.dst));
        let h = vec![vec![1.0]; 4];
        let he = vec![vec![0.0]; edges.len()];
        let p = contract_edges(&h, &he, &edges, &vec![1.0; edges.len()]);
        assert_eq!(p.contracted.len(), 2);
        assert_eq!(p.node_features.len(), 2);
        assert_eq!(p.merge_map, vec![0, 0, 1, 1]);
        assert_eq!(
            p.edges,
            vec![PooledEdge { src: 0, dst: 1, weight: 2.0 }, PooledEdge { src: 1, dst: 0, weight: 2.0 }]
        );
    }

    #[test]
    fn no_edges_returns_the_graph() {
        let h = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let p = contract_edges(&h, &[], &[], &[]);
        assert_eq!(p.node_features, h);
        assert_eq!(p.merge_map, vec![0, 1]);
    }
}
