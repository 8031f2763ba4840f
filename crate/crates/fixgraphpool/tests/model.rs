use proptest::prelude::*;
use sagaze_core::SaLabel;
use sagaze_fixgraphpool::sample::random_graph;
use sagaze_fixgraphpool::{contract_edges, edge_scores, train, FixGraphPool, GraphScaler, ModelConfig, PooledEdge};
use sagaze_nn::gradcheck::check_params;

fn model(seed: u64) -> FixGraphPool {
    FixGraphPool::new(ModelConfig::default(), seed).unwrap()
}

fn fitted(seed: u64, graphs: &[sagaze_core::FixationGraph]) -> FixGraphPool {
    let mut m = model(seed);
    m.scaler = GraphScaler::fit(graphs);
    m
}

#[test]
fn full_forward_gradient_check() {
    for (n, seed) in [(8, 3), (10, 4)] {
        let g = random_graph(n, SaLabel::Poor, seed);
        let m = fitted(seed, std::slice::from_ref(&g));
        let prepared = m.prepare(&g).unwrap();
        let report = check_params(&m.store, 1e-5, |tape, store| {
            m.loss_on(tape, store, &[&prepared]).map_err(|e| match e {
                sagaze_fixgraphpool::FgpError::Nn(e) => e,
                other => panic!("{other}"),
            })
        })
        .unwrap();
        assert_eq!(report.checked, m.store.num_scalars());
        assert!(report.max_rel_error <= 1e-4, "{n} nodes: {} at {:?}", report.max_rel_error, report.worst);
        assert!(m.logits(&g).unwrap().iter().all(|x| x.is_finite()));
    }
}

#[test]
fn single_node_graph_readouts_follow_the_node() {
    let g = random_graph(1, SaLabel::Good, 9);
    let m = model(1);
    let traces = m.trace(&g).unwrap();
    assert_eq!(traces.len(), 3);
    for t in &traces {
        assert_eq!((t.nodes_in, t.nodes_out), (1, 1));
        assert_eq!(t.readout, t.hidden.row(0).to_vec());
    }
    assert!(m.logits(&g).unwrap().iter().all(|x| x.is_finite()));
}

#[test]
fn empty_graph_is_rejected() {
    let mut g = random_graph(2, SaLabel::Good, 1);
    g.nodes.clear();
    g.edges.clear();
    assert!(matches!(model(0).logits(&g), Err(sagaze_fixgraphpool::FgpError::EmptyGraph)));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, rng_seed: proptest::test_runner::RngSeed::Fixed(5), ..ProptestConfig::default() })]

    #[test]
    fn permuted_graph_gives_same_logits(n in 1usize..14, seed in any::<u64>(), perm_seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let g = random_graph(n, SaLabel::Good, seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let mut shuffled = g.relabel(&perm);
        shuffled.edges.reverse();
        let m = fitted(seed, std::slice::from_ref(&g));
        let (a, b) = (m.logits(&g).unwrap(), m.logits(&shuffled).unwrap());
        prop_assert!((a[0] - b[0]).abs() <= 1e-9 && (a[1] - b[1]).abs() <= 1e-9);
    }

    #[test]
    fn pooling_is_a_matching(n in 1usize..20, seed in any::<u64>()) {
        let g = random_graph(n, SaLabel::Poor, seed);
        let m = fitted(seed, std::slice::from_ref(&g));
        let traces = m.trace(&g).unwrap();
        let mut nodes = n;
        for t in &traces {
            prop_assert_eq!(t.nodes_in, nodes);
            let mut used = vec![false; t.nodes_in];
            for &k in &t.contracted {
                let (a, b) = t.edges_in[k];
                prop_assert!(!used[a] && !used[b]);
                used[a] = true;
                used[b] = true;
                prop_assert_eq!(t.merge_map[a], t.merge_map[b]);
            }
            prop_assert_eq!(t.nodes_out, t.nodes_in - t.contracted.len());
            let mut hit = vec![false; t.nodes_out];
            t.merge_map.iter().for_each(|&j| hit[j] = true);
            prop_assert!(hit.iter().all(|&h| h));
            nodes = t.nodes_out;
        }
    }

    #[test]
    fn raising_a_raw_score_never_delays_its_edge(raw in prop::collection::vec(-3.0f64..3.0, 3), which in 0usize..3, bump in 0.0f64..4.0) {
        let src = [0, 0, 0];
        let pairs = [(0, 1), (0, 2), (0, 3)];
        let rank = |r: &[f64]| {
            let s = edge_scores(r, &src, 0.5);
            sagaze_fixgraphpool::pool::contraction_order(&pairs, &s).iter().position(|&k| k == which).unwrap()
        };
        let mut raised = raw.clone();
        raised[which] += bump;
        prop_assert!(rank(&raised) <= rank(&raw));
    }
}

#[test]
fn chain_with_perfect_matching_halves() {
    // two disjoint bidirectional pairs plus a chain link: greedy finds a perfect matching
    let edges = vec![
        PooledEdge { src: 0, dst: 1, weight: 1.0 },
        PooledEdge { src: 1, dst: 2, weight: 1.0 },
        PooledEdge { src: 2, dst: 3, weight: 1.0 },
        PooledEdge { src: 3, dst: 4, weight: 1.0 },
        PooledEdge { src: 4, dst: 5, weight: 1.0 },
    ];
    let h = vec![vec![1.0]; 6];
    let he = vec![vec![0.0]; 5];
    let p = contract_edges(&h, &he, &edges, &[1.5; 5]);
    assert_eq!(p.node_features.len(), 3);
    assert_eq!(p.contracted, vec![0, 2, 4]);
}

#[test]
fn toy_separable_set_is_learned() {
    let good = random_graph(6, SaLabel::Good, 100);
    let poor = random_graph(9, SaLabel::Poor, 200);
    let mut set = Vec::new();
    for _ in 0..20 {
        set.push(good.clone());
        set.push(poor.clone());
    }
    let out = train(&set, &ModelConfig::default(), 7).unwrap();
    assert_eq!(out.model.predict(&good).unwrap(), SaLabel::Good);
    assert_eq!(out.model.predict(&poor).unwrap(), SaLabel::Poor);
    assert!(out.epoch_loss.last().unwrap() < out.epoch_loss.first().unwrap());
}

#[test]
fn training_is_deterministic_and_follows_schedule() {
    let set: Vec<_> = (0..24)
        .map(|i| random_graph(4 + i % 5, if i % 2 == 0 { SaLabel::Good } else { SaLabel::Poor }, i as u64))
        .collect();
    let cfg = ModelConfig { epochs: 13, ..ModelConfig::default() };
    let a = train(&set, &cfg, 42).unwrap();
    let b = train(&set, &cfg, 42).unwrap();
    assert_eq!(a.epoch_loss, b.epoch_loss);
    assert_eq!(a.model.to_checkpoint(), b.model.to_checkpoint());
    assert_eq!(a.lr_trace[0], 0.005);
    assert_eq!(a.lr_trace[4], 0.005);
    assert_eq!(a.lr_trace[5], 0.0025);
    assert_eq!(a.lr_trace[10], 0.00125);
    assert_eq!(a.lr_trace[12], 0.00125);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let set: Vec<_> = (0..6).map(|i| random_graph(5, SaLabel::Good, i)).collect();
    let out = train(&set, &ModelConfig { epochs: 2, ..ModelConfig::default() }, 1).unwrap();
    let back = FixGraphPool::from_checkpoint(&out.model.to_checkpoint()).unwrap();
    for g in &set {
        assert_eq!(out.model.logits(g).unwrap(), back.logits(g).unwrap());
    }
    assert!(FixGraphPool::from_checkpoint("{}").is_err());
}

#[test]
fn empty_training_set_fails() {
    assert!(matches!(train(&[], &ModelConfig::default(), 0), Err(sagaze_fixgraphpool::FgpError::EmptyFold)));
}
