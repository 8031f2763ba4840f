use serde::{Deserialize, Serialize};

use sagaze_core::SaLabel;
use sagaze_nn::optim::{AdamW, OptimState};
use sagaze_nn::{ParamStore, Tape, Tensor};

use crate::folds::make_folds;
use crate::HarnessError;

/// Per-feature z-scoring fitted on training rows. Features with zero
/// variance are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub keep: Vec<bool>,
}

impl Standardizer {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            mean.iter_mut().zip(r.as_ref()).for_each(|(m, x)| *m += x / n);
        }
        let mut var = vec![0.0; d];
        for r in rows {
            var.iter_mut().zip(r.as_ref()).zip(&mean).for_each(|((v, x), m)| *v += (x - m).powi(2) / n);
        }
        let std: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        let keep: Vec<bool> = std.iter().map(|&s| s > 1e-12).collect();
        for (i, k) in keep.iter().enumerate() {
            if !k {
                log::warn!("feature {i} has zero variance on the training data, dropped");
            }
        }
        Self { mean, std, keep }
    }

    pub fn dim(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().filter(|(i, _)| self.keep[*i]).map(|(i, x)| (x - self.mean[i]) / self.std[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    /// Candidate L2 strengths for the inner grid search.
    pub lambdas: Vec<f64>,
    pub inner_folds: usize,
    pub iterations: usize,
    pub lr: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self { lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0], inner_folds: 5, iterations: 300, lr: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
}

impl LogisticModel {
    /// Log-odds of Poor.
    pub fn decision(&self, row: &[f64]) -> f64 {
        let x = self.standardizer.transform(row);
        self.bias + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Full-batch fit of `mean CE + lambda |w|^2` on standardized rows.
fn fit(x: &[Vec<f64>], y: &[SaLabel], lambda: f64, cfg: &LogRegConfig) -> Result<(Vec<f64>, f64), HarnessError> {
    let d = x.first().map_or(0, Vec::len);
    let xs = Tensor::from_rows(x, d)?;
    let targets: Vec<usize> = y.iter().map(|l| l.class_index()).collect();
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::zeros(d, 1));
    let b = store.add("b", Tensor::zeros(1, 1));
    let mut opt = OptimState::new(AdamW { lr: cfg.lr, weight_decay: 0.0, ..AdamW::default() }, &store);
    for _ in 0..cfg.iterations {
        let mut tape = Tape::new();
        let xv = tape.constant(xs.clone());
        let wv = tape.param(&store, w);
        let bv = tape.param(&store, b);
        let z = tape.matmul(xv, wv);
        let z = tape.add_row(z, bv);
        let zero = tape.constant(Tensor::zeros(x.len(), 1));
        let logits = tape.concat_cols(&[zero, z]);
        let ce = tape.softmax_cross_entropy(logits, &targets);
        let sq = tape.sum_squares(wv);
        let reg = tape.scale(sq, lambda);
        let loss = tape.add(ce, reg);
        let grads = tape.backward(loss)?;
        store.zero_grads();
        grads.accumulate_into(&mut store);
        opt.step(&mut store)?;
    }
    Ok((store.value(w).data().to_vec(), store.value(b).item()))
}

fn fit_model<R: AsRef<[f64]>>(
    rows: &[R],
    y: &[SaLabel],
    lambda: f64,
    cfg: &LogRegConfig,
) -> Result<LogisticModel, HarnessError> {
    let standardizer = Standardizer::fit(rows);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.transform(r.as_ref())).collect();
    let (weights, bias) = fit(&x, y, lambda, cfg)?;
    Ok(LogisticModel { standardizer, weights, bias, lambda })
}

/// Fit the baseline, choosing the L2 strength by inner cross-validation
/// over the `groups` (participants) of the training rows. Ties prefer the
/// stronger penalty.
pub fn train_logreg<R: AsRef<[f64]>>(
    rows: &[R],
    labels: &[SaLabel],
    groups: &[String],
    cfg: &LogRegConfig,
    seed: u64,
) -> Result<LogisticModel, HarnessError> {
    assert_eq!(rows.len(), labels.len(), "one label per row");
    assert_eq!(rows.len(), groups.len(), "one group per row");
    if cfg.lambdas.is_empty() {
        return Err(HarnessError::InvalidConfig("logistic regression needs at least one lambda".into()));
    }
    let mut unique = groups.to_vec();
    unique.sort();
    unique.dedup();
    let k = cfg.inner_folds.min(unique.len());
    let lambda = if cfg.lambdas.len() == 1 || k < 2 {
        cfg.lambdas[0]
    } else {
        let folds = make_folds(&unique, k, seed)?;
        let mut best = (f64::NEG_INFINITY, cfg.lambdas[0]);
        for &lambda in &cfg.lambdas {
            let mut correct = 0usize;
            let mut total = 0usize;
            for test in &folds {
                let is_test = |i: usize| test.binary_search(&groups[i]).is_ok();
                let train: Vec<usize> = (0..rows.len()).filter(|&i| !is_test(i)).collect();
                let held: Vec<usize> = (0..rows.len()).filter(|&i| is_test(i)).collect();
                let tr_rows: Vec<&[f64]> = train.iter().map(|&i| rows[i].as_ref()).collect();
                let tr_y: Vec<SaLabel> = train.iter().map(|&i| labels[i]).collect();
                let m = fit_model(&tr_rows, &tr_y, lambda, cfg)?;
                correct += held.iter().filter(|&&i| predict_logreg(&m, rows[i].as_ref()) == labels[i]).count();
                total += held.len();
            }
            let acc = correct as f64 / total.max(1) as f64;
            log::debug!("logreg lambda {lambda}: inner accuracy {acc:.4}");
            if acc >= best.0 {
                best = (acc, lambda);
            }
        }
        best.1
    };
    fit_model(rows, labels, lambda, cfg)
}

pub fn predict_logreg(model: &LogisticModel, row: &[f64]) -> SaLabel {
    if model.decision(row) > 0.0 {
        SaLabel::Poor
    } else {
        SaLabel::Good
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_set_is_fitted() {
        let rows: Vec<[f64; 2]> = (0..40).map(|i| [i as f64 * 0.1, (i % 7) as f64]).collect();
        let labels: Vec<SaLabel> = (0..40).map(|i| if i >= 20 { SaLabel::Poor } else { SaLabel::Good }).collect();
        let groups: Vec<String> = (0..40).map(|i| format!("P{}", i % 8)).collect();
        let m = train_logreg(&rows, &labels, &groups, &LogRegConfig::default(), 3).unwrap();
        let acc = rows.iter().zip(&labels).filter(|(r, l)| predict_logreg(&m, &r[..]) == **l).count();
        assert_eq!(acc, 40);
    }

    #[test]
    fn constant_features_predict_majority() {
        let rows = vec![[1.0, 2.0]; 10];
        let labels: Vec<SaLabel> = (0..10).map(|i| if i < 7 { SaLabel::Poor } else { SaLabel::Good }).collect();
        let groups: Vec<String> = (0..10).map(|i| format!("P{i}")).collect();
        let m = train_logreg(&rows, &labels, &groups, &LogRegConfig::default(), 0).unwrap();
        assert_eq!(m.standardizer.dim(), 0);
        assert_eq!(predict_logreg(&m, &[5.0, -3.0]), SaLabel::Poor);
    }

    #[test]
    fn standardizer_uses_training_statistics() {
        let train = vec![vec![1.0, 10.0], vec![3.0, 10.0]];
        let s = Standardizer::fit(&train);
        assert_eq!(s.mean, vec![2.0, 10.0]);
        assert_eq!(s.keep, vec![true, false]);
        assert_eq!(s.transform(&[5.0, 99.0]), vec![3.0]);
    }
}
