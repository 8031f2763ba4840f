use std::fs;
use std::path::Path;

use sagaze_core::dataset::load_dataset;
use sagaze_core::events::{classify_events, normalize_pupil, ClassifierConfig, EventKind};
use sagaze_core::metrics::{window_metrics, MetricVector};
use sagaze_core::synth::{generate_cohort, generate_dataset, generate_trial, SynthConfig, SynthProfile};
use sagaze_core::{Incident, SaLabel, TrialRecording};

fn whole_trial_metrics(trial: &TrialRecording) -> MetricVector {
    let events = classify_events(&trial.samples, &ClassifierConfig::default()).unwrap();
    let pz = normalize_pupil(trial).unwrap();
    let t1 = trial.samples.last().unwrap().t;
    window_metrics(&events, &pz, 0.0, t1).unwrap()
}

#[test]
fn good_profile_has_larger_saccades() {
    let wins = (0..20u64)
        .filter(|&s| {
            let good = generate_trial(&SynthProfile::good(), "P01", Incident::Bleeding, 1000 + s);
            let poor = generate_trial(&SynthProfile::poor(), "P01", Incident::Bleeding, 2000 + s);
            whole_trial_metrics(&good).msa.unwrap() > whole_trial_metrics(&poor).msa.unwrap()
        })
        .count();
    assert!(wins >= 16, "Good MSA exceeded Poor in only {wins}/20 seeds");
}

#[test]
fn virtual_rate_follows_virtual_probability() {
    let low = SynthProfile { p_virtual_fixation: 0.1, ..SynthProfile::good() };
    let high = SynthProfile { p_virtual_fixation: 0.5, ..SynthProfile::good() };
    let wins = (0..20u64)
        .filter(|&s| {
            let a = whole_trial_metrics(&generate_trial(&low, "P01", Incident::Vomiting, s));
            let b = whole_trial_metrics(&generate_trial(&high, "P01", Incident::Vomiting, s));
            b.vfr.unwrap() > a.vfr.unwrap()
        })
        .count();
    assert!(wins >= 16, "higher virtual probability raised VFR in only {wins}/20 seeds");
}

#[test]
fn zero_amplitude_profile_is_one_fixation() {
    let p = SynthProfile { saccade_amplitude_mean_deg: 0.0, blink_rate: 0.0, ..SynthProfile::good() };
    let trial = generate_trial(&p, "P01", Incident::Bleeding, 5);
    let events = classify_events(&trial.samples, &ClassifierConfig::default()).unwrap();
    let fixations: Vec<_> = events.iter().filter(|e| e.kind == EventKind::Fixation).collect();
    assert_eq!(fixations.len(), 1, "{events:?}");
    assert_eq!(events.len(), 1);
}

#[test]
fn fixed_seed_reproduces_the_stream() {
    let a = generate_trial(&SynthProfile::poor(), "P07", Incident::Vomiting, 99);
    let b = generate_trial(&SynthProfile::poor(), "P07", Incident::Vomiting, 99);
    assert_eq!(a, b);
    let c = generate_trial(&SynthProfile::poor(), "P07", Incident::Vomiting, 100);
    assert_ne!(a.samples, c.samples);
}

#[test]
fn cohort_counts() {
    let trials = generate_cohort(&SynthConfig::default(), 3).unwrap();
    assert_eq!(trials.len(), 60);
    let good = trials.iter().filter(|t| t.sa_label == SaLabel::Good).count();
    assert_eq!((good, trials.len() - good), (36, 24));
    for pair in trials.chunks(2) {
        assert_eq!(pair[0].participant_id, pair[1].participant_id);
        assert_eq!((pair[0].incident, pair[1].incident), (Incident::Bleeding, Incident::Vomiting));
    }
    let all_good = generate_cohort(&SynthConfig { n_users: 5, good_mix: 1.0, ..Default::default() }, 3).unwrap();
    assert_eq!(all_good.len(), 10);
    assert!(all_good.iter().all(|t| t.sa_label == SaLabel::Good));
}

fn directory_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn regenerated_dataset_is_identical_and_processable() {
    let cfg = SynthConfig { n_users: 5, ..Default::default() };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let written = generate_dataset(&cfg, 11, a.path()).unwrap();
    generate_dataset(&cfg, 11, b.path()).unwrap();
    let contents = directory_contents(a.path());
    assert_eq!(contents.len(), 20);
    assert_eq!(contents, directory_contents(b.path()));

    let mut loaded = load_dataset(a.path()).unwrap();
    assert_eq!(loaded.len(), written.len());
    let key = |t: &TrialRecording| (t.participant_id.clone(), t.incident.to_string());
    loaded.sort_by_key(key);
    let mut written = written;
    written.sort_by_key(key);
    for (l, w) in loaded.iter().zip(&written) {
        assert_eq!(l.sa_label, w.sa_label);
        assert_eq!(l.samples.len(), w.samples.len());
        assert!((l.incident_time - w.incident_time).abs() < 1e-9);
        let events = classify_events(&l.samples, &ClassifierConfig::default()).unwrap();
        assert!(events.iter().any(|e| e.kind == EventKind::Fixation));
        assert!(events.iter().any(|e| e.kind == EventKind::Saccade));
        normalize_pupil(l).unwrap();
    }
}
