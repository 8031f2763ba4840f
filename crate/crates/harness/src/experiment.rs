use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sagaze_core::eval::{evaluate, BinaryMetrics};
use sagaze_core::events::ClassifierConfig;
use sagaze_core::graph::{FixationGraph, GraphConfig};
use sagaze_core::{SaLabel, TrialRecording};
use sagaze_fixgraphpool::{predict_all, train, FixGraphPool, ModelConfig};

use crate::folds::make_folds;
use crate::logreg::{predict_logreg, train_logreg, LogRegConfig, LogisticModel};
use crate::oversample::oversample_indices;
use crate::report::{config_hash, FoldReport};
use crate::windows::{process_trial, slice_windows, WindowConfig, WindowSample};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub folds: usize,
    pub windows: WindowConfig,
    pub logreg: LogRegConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self { folds: 5, windows: WindowConfig::default(), logreg: LogRegConfig::default() }
    }
}

/// Every parameter that influences an experiment's results.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub classifier: ClassifierConfig,
    pub graph: GraphConfig,
    pub model: ModelConfig,
    pub harness: HarnessConfig,
}

/// Everything produced for one outer fold.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test_participants: Vec<String>,
    pub train_participants: Vec<String>,
    /// Balanced training set as indices into the window list.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub model: FixGraphPool,
    pub baseline: LogisticModel,
    pub metrics: BinaryMetrics,
    pub baseline_metrics: BinaryMetrics,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub windows: Vec<WindowSample>,
    pub folds: Vec<FoldOutcome>,
    pub report: FoldReport,
}

/// Independent seed for one pipeline stage.
pub fn stage_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.random()
}

const FOLD_STREAM: u64 = 1;
const OVERSAMPLE_STREAM: u64 = 100;
const MODEL_STREAM: u64 = 200;
const BASELINE_STREAM: u64 = 300;

/// Classify and slice every trial into windows, ordered by participant,
/// incident and window start.
pub fn build_windows(trials: &[TrialRecording], cfg: &ExperimentConfig) -> Result<Vec<WindowSample>, HarnessError> {
    cfg.harness.windows.validate()?;
    let mut per_trial = trials
        .par_iter()
        .map(|t| {
            let p = process_trial(t, &cfg.classifier)?;
            slice_windows(&p, &cfg.harness.windows, &cfg.graph)
        })
        .collect::<Result<Vec<_>, _>>()?;
    per_trial.sort_by(|a, b| {
        let key = |w: &[WindowSample]| w.first().map(|s| (s.participant_id.clone(), s.incident.to_string()));
        key(a).cmp(&key(b))
    });
    let windows: Vec<WindowSample> = per_trial.into_iter().flatten().collect();
    if windows.is_empty() {
        return Err(HarnessError::NoWindows);
    }
    Ok(windows)
}

/// Training (balanced) and test indices of one fold.
pub fn split_fold(
    windows: &[WindowSample],
    test_participants: &[String],
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), HarnessError> {
    let is_test = |w: &WindowSample| test_participants.binary_search(&w.participant_id).is_ok();
    let test: Vec<usize> = (0..windows.len()).filter(|&i| is_test(&windows[i])).collect();
    let train: Vec<usize> = (0..windows.len()).filter(|&i| !is_test(&windows[i])).collect();
    let pids: Vec<&str> = train.iter().map(|&i| windows[i].participant_id.as_str()).collect();
    let labels: Vec<SaLabel> = train.iter().map(|&i| windows[i].label).collect();
    let balanced = oversample_indices(&pids, &labels, seed)?.into_iter().map(|k| train[k]).collect();
    Ok((balanced, test))
}

fn run_fold(
    windows: &[WindowSample],
    fold: usize,
    test_participants: &[String],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<FoldOutcome, HarnessError> {
    let (train_idx, test_idx) =
        split_fold(windows, test_participants, stage_seed(seed, OVERSAMPLE_STREAM + fold as u64))?;
    let train_participants: Vec<String> =
        train_idx.iter().map(|&i| windows[i].participant_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    assert!(
        train_participants.iter().all(|p| test_participants.binary_search(p).is_err()),
        "participant leaked between training and test"
    );

    let train_graphs: Vec<FixationGraph> = train_idx.iter().map(|&i| windows[i].graph.clone()).collect();
    let test_graphs: Vec<FixationGraph> = test_idx.iter().map(|&i| windows[i].graph.clone()).collect();
    let test_labels: Vec<SaLabel> = test_idx.iter().map(|&i| windows[i].label).collect();

    let outcome = train(&train_graphs, &cfg.model, stage_seed(seed, MODEL_STREAM + fold as u64))?;
    let preds = predict_all(&outcome.model, &test_graphs)?;
    let metrics = evaluate(&preds, &test_labels).expect("one prediction per window");

    let rows: Vec<[f64; 10]> = train_idx.iter().map(|&i| windows[i].features).collect();
    let labels: Vec<SaLabel> = train_idx.iter().map(|&i| windows[i].label).collect();
    let groups: Vec<String> = train_idx.iter().map(|&i| windows[i].participant_id.clone()).collect();
    let baseline =
        train_logreg(&rows, &labels, &groups, &cfg.harness.logreg, stage_seed(seed, BASELINE_STREAM + fold as u64))?;
    let lr_preds: Vec<SaLabel> = test_idx.iter().map(|&i| predict_logreg(&baseline, &windows[i].features)).collect();
    let baseline_metrics = evaluate(&lr_preds, &test_labels).expect("one prediction per window");
    log::info!(
        "fold {fold}: {} train / {} test windows, model acc {:.3}, baseline acc {:.3}",
        train_idx.len(),
        test_idx.len(),
        metrics.accuracy,
        baseline_metrics.accuracy
    );
    Ok(FoldOutcome {
        fold,
        test_participants: test_participants.to_vec(),
        train_participants,
        train_indices: train_idx,
        test_indices: test_idx,
        model: outcome.model,
        baseline,
        metrics,
        baseline_metrics,
    })
}

/// Full protocol on in-memory trials: windows, participant folds,
/// oversampling, both classifiers, evaluation and the report. Folds run
/// in parallel on `jobs` threads (all cores when `None`).
pub fn run_experiment(
    trials: &[TrialRecording],
    cfg: &ExperimentConfig,
    seed: u64,
    jobs: Option<usize>,
) -> Result<ExperimentOutput, HarnessError> {
    cfg.model.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    pool.install(|| {
        let windows = build_windows(trials, cfg)?;
        let participants: Vec<String> = windows.iter().map(|w| w.participant_id.clone()).collect();
        let test_sets = make_folds(&participants, cfg.harness.folds, stage_seed(seed, FOLD_STREAM))?;
        let folds = test_sets
            .par_iter()
            .enumerate()
            .map(|(k, test)| run_fold(&windows, k, test, cfg, seed))
            .collect::<Result<Vec<_>, _>>()?;
        let report = FoldReport::new(config_hash(cfg), seed, &windows, &folds);
        Ok(ExperimentOutput { windows, folds, report })
    })
}
