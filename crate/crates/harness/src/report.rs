use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sagaze_core::eval::BinaryMetrics;
use sagaze_core::SaLabel;

use crate::experiment::{ExperimentConfig, FoldOutcome};
use crate::windows::WindowSample;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const METRIC_KEYS: [&str; 4] = ["acc", "f1", "prec", "rec"];

/// SHA-256 of the canonical JSON encoding of the configuration.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> MeanStd {
    if xs.is_empty() {
        return MeanStd { mean: 0.0, std: 0.0 };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub good: usize,
    pub poor: usize,
}

impl ClassCounts {
    pub fn of<'a>(labels: impl IntoIterator<Item = &'a SaLabel>) -> Self {
        let mut c = ClassCounts::default();
        for l in labels {
            match l {
                SaLabel::Good => c.good += 1,
                SaLabel::Poor => c.poor += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldEntry {
    pub fold: usize,
    pub acc: f64,
    pub f1: f64,
    pub prec: f64,
    pub rec: f64,
}

impl FoldEntry {
    fn new(fold: usize, m: &BinaryMetrics) -> Self {
        Self { fold, acc: m.accuracy, f1: m.f1, prec: m.precision, rec: m.recall }
    }

    fn get(&self, key: &str) -> f64 {
        match key {
            "acc" => self.acc,
            "f1" => self.f1,
            "prec" => self.prec,
            "rec" => self.rec,
            _ => unreachable!("unknown metric {key}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDetail {
    pub fold: usize,
    pub test_participants: Vec<String>,
    pub train_windows: usize,
    pub test_counts: ClassCounts,
    pub baseline_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub folds: Vec<FoldEntry>,
    pub aggregate: BTreeMap<String, MeanStd>,
}

impl ModelSection {
    fn new(folds: Vec<FoldEntry>) -> Self {
        let aggregate = METRIC_KEYS
            .iter()
            .map(|k| (k.to_string(), mean_std(&folds.iter().map(|f| f.get(k)).collect::<Vec<_>>())))
            .collect();
        Self { folds, aggregate }
    }
}

/// Cross-validation report. Top-level `folds`/`aggregate` belong to the
/// graph model; the logistic baseline has its own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub folds: Vec<FoldEntry>,
    pub aggregate: BTreeMap<String, MeanStd>,
    pub baseline: ModelSection,
    pub class_counts: ClassCounts,
    pub fold_details: Vec<FoldDetail>,
}

/// What a report records about one fold.
#[derive(Debug, Clone)]
pub struct FoldSummary {
    pub fold: usize,
    pub test_participants: Vec<String>,
    pub train_windows: usize,
    pub test_indices: Vec<usize>,
    pub metrics: BinaryMetrics,
    pub baseline_metrics: BinaryMetrics,
    pub baseline_lambda: f64,
}

impl From<&FoldOutcome> for FoldSummary {
    fn from(f: &FoldOutcome) -> Self {
        Self {
            fold: f.fold,
            test_participants: f.test_participants.clone(),
            train_windows: f.train_indices.len(),
            test_indices: f.test_indices.clone(),
            metrics: f.metrics,
            baseline_metrics: f.baseline_metrics,
            baseline_lambda: f.baseline.lambda,
        }
    }
}

impl FoldReport {
    pub fn new(config_hash: String, seed: u64, windows: &[WindowSample], folds: &[FoldOutcome]) -> Self {
        let summaries: Vec<FoldSummary> = folds.iter().map(FoldSummary::from).collect();
        Self::from_summaries(config_hash, seed, windows, &summaries)
    }

    pub fn from_summaries(config_hash: String, seed: u64, windows: &[WindowSample], folds: &[FoldSummary]) -> Self {
        let model = ModelSection::new(folds.iter().map(|f| FoldEntry::new(f.fold, &f.metrics)).collect());
        let baseline = ModelSection::new(folds.iter().map(|f| FoldEntry::new(f.fold, &f.baseline_metrics)).collect());
        let fold_details = folds
            .iter()
            .map(|f| FoldDetail {
                fold: f.fold,
                test_participants: f.test_participants.clone(),
                train_windows: f.train_windows,
                test_counts: ClassCounts::of(f.test_indices.iter().map(|&i| &windows[i].label)),
                baseline_lambda: f.baseline_lambda,
            })
            .collect();
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            config_hash,
            seed,
            folds: model.folds,
            aggregate: model.aggregate,
            baseline,
            class_counts: ClassCounts::of(windows.iter().map(|w| &w.label)),
            fold_details,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Human-readable summary table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let pct = |m: &MeanStd| format!("{:5.1} ± {:4.1}", 100.0 * m.mean, 100.0 * m.std);
        let _ = writeln!(s, "seed {}  config {}", self.seed, &self.config_hash[..12.min(self.config_hash.len())]);
        let _ = writeln!(s, "windows: {} good, {} poor", self.class_counts.good, self.class_counts.poor);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<14}{:>14}{:>14}{:>14}{:>14}", "model", "accuracy", "F1", "precision", "recall");
        for (name, agg) in [("FixGraphPool", &self.aggregate), ("LR", &self.baseline.aggregate)] {
            let _ = write!(s, "{name:<14}");
            for k in METRIC_KEYS {
                let _ = write!(s, "{:>14}", pct(&agg[k]));
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s);
        let _ =
            writeln!(s, "{:<6}{:>10}{:>10}{:>10}{:>10}   test participants", "fold", "acc", "f1", "LR acc", "LR f1");
        for ((f, b), d) in self.folds.iter().zip(&self.baseline.folds).zip(&self.fold_details) {
            let _ = writeln!(
                s,
                "{:<6}{:>10.3}{:>10.3}{:>10.3}{:>10.3}   {}",
                f.fold,
                f.acc,
                f.f1,
                b.acc,
                b.f1,
                d.test_participants.join(",")
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let m = mean_std(&[1.0, 3.0]);
        assert_eq!((m.mean, m.std), (2.0, 1.0));
        assert_eq!(mean_std(&[]).std, 0.0);
    }

    #[test]
    fn hash_tracks_config() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.model.epochs = 39;
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
