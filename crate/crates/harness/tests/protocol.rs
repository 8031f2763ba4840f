use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use sagaze_core::graph::GraphConfig;
use sagaze_core::synth::{generate_cohort, generate_trial, SynthConfig, SynthProfile};
use sagaze_core::{ClassifierConfig, Incident, SaLabel};
use sagaze_harness::experiment::{build_windows, split_fold};
use sagaze_harness::oversample::oversample_indices;
use sagaze_harness::{
    make_folds, process_trial, slice_windows, train_logreg, ExperimentConfig, HarnessError, LogRegConfig, Standardizer,
    WindowConfig,
};

fn windows_with_incident_at(incident_time: f64) -> Result<usize, HarnessError> {
    let mut trial = generate_trial(&SynthProfile::good(), "P01", Incident::Bleeding, 4);
    trial.incident_time = incident_time;
    let p = process_trial(&trial, &ClassifierConfig::default())?;
    slice_windows(&p, &WindowConfig::default(), &GraphConfig::default()).map(|w| w.len())
}

#[test]
fn window_counts_follow_the_incident() {
    assert_eq!(windows_with_incident_at(30.0).unwrap(), 15);
    assert_eq!(windows_with_incident_at(10.0).unwrap(), 4);
    let err = windows_with_incident_at(6.0).unwrap_err();
    assert!(matches!(err, HarnessError::IncidentBeforeData { .. }), "{err}");
    assert!(err.to_string().contains("P01"));
}

#[test]
fn windows_end_before_the_incident() {
    let mut trial = generate_trial(&SynthProfile::poor(), "P02", Incident::Vomiting, 8);
    trial.incident_time = 33.5;
    let p = process_trial(&trial, &ClassifierConfig::default()).unwrap();
    let w = slice_windows(&p, &WindowConfig::default(), &GraphConfig::default()).unwrap();
    assert_eq!(w.len(), 15);
    assert!((w[0].window[0] - 12.5).abs() < 1e-9);
    assert!((w.last().unwrap().window[1] - 33.5).abs() < 1e-9);
    for s in &w {
        assert_eq!(s.label, SaLabel::Poor);
        assert!(s.graph.num_nodes() > 0);
        for n in &s.graph.nodes {
            assert!(n.onset >= s.window[0] - 1e-9 && n.onset < s.window[1]);
        }
    }
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("P{i:02}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, rng_seed: proptest::test_runner::RngSeed::Fixed(5), ..ProptestConfig::default() })]

    #[test]
    fn folds_partition_participants(n in 2usize..40, k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let people = ids(n);
        let mut with_dups = people.clone();
        with_dups.extend(people.iter().take(n / 2).cloned());
        let folds = make_folds(&with_dups, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = BTreeSet::new();
        for f in &folds {
            for p in f {
                prop_assert!(seen.insert(p.clone()), "{} in two folds", p);
            }
        }
        prop_assert_eq!(seen.into_iter().collect::<Vec<_>>(), people);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(&folds, &make_folds(&with_dups, k, seed).unwrap());
    }

    #[test]
    fn oversampling_balances_with_originals_first(
        users in prop::collection::vec((1usize..20, any::<bool>()), 2..12),
        seed in any::<u64>(),
    ) {
        let mut pids = Vec::new();
        let mut labels = Vec::new();
        for (u, &(count, good)) in users.iter().enumerate() {
            for _ in 0..count {
                pids.push(format!("P{u:02}"));
                labels.push(if good { SaLabel::Good } else { SaLabel::Poor });
            }
        }
        let refs: Vec<&str> = pids.iter().map(String::as_str).collect();
        let both = labels.contains(&SaLabel::Good) && labels.contains(&SaLabel::Poor);
        let out = oversample_indices(&refs, &labels, seed);
        if !both {
            prop_assert!(matches!(out, Err(HarnessError::SingleClassFold)));
            return Ok(());
        }
        let out = out.unwrap();
        prop_assert_eq!(&out[..labels.len()], &(0..labels.len()).collect::<Vec<_>>()[..]);
        let good = out.iter().filter(|&&i| labels[i] == SaLabel::Good).count();
        prop_assert_eq!(2 * good, out.len());
        let poor_n = labels.iter().filter(|&&l| l == SaLabel::Poor).count();
        let minority = if poor_n < labels.len() - poor_n { SaLabel::Poor } else { SaLabel::Good };
        prop_assert!(out[labels.len()..].iter().all(|&i| labels[i] == minority));
    }
}

#[test]
fn folds_keep_participants_apart_and_standardize_on_training_rows() {
    let trials = generate_cohort(&SynthConfig { n_users: 10, ..Default::default() }, 21).unwrap();
    let cfg = ExperimentConfig::default();
    let windows = build_windows(&trials, &cfg).unwrap();
    let participants: Vec<String> = windows.iter().map(|w| w.participant_id.clone()).collect();
    let folds = make_folds(&participants, 5, 3).unwrap();
    for test in &folds {
        let (train, test_idx) = split_fold(&windows, test, 9).unwrap();
        let train_people: BTreeSet<&str> = train.iter().map(|&i| windows[i].participant_id.as_str()).collect();
        assert!(test.iter().all(|p| !train_people.contains(p.as_str())));
        assert!(test_idx.iter().all(|&i| test.contains(&windows[i].participant_id)));
        let mut by_label: BTreeMap<SaLabel, usize> = BTreeMap::new();
        for &i in &train {
            *by_label.entry(windows[i].label).or_default() += 1;
        }
        assert_eq!(by_label.get(&SaLabel::Good), by_label.get(&SaLabel::Poor));

        let rows: Vec<[f64; 10]> = train.iter().map(|&i| windows[i].features).collect();
        let labels: Vec<SaLabel> = train.iter().map(|&i| windows[i].label).collect();
        let groups: Vec<String> = train.iter().map(|&i| windows[i].participant_id.clone()).collect();
        let cheap = LogRegConfig { iterations: 40, ..LogRegConfig::default() };
        let model = train_logreg(&rows, &labels, &groups, &cheap, 1).unwrap();
        assert_eq!(model.standardizer, Standardizer::fit(&rows));
    }
}
