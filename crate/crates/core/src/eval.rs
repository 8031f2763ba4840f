//! Binary classification metrics with Poor as the positive class.

use serde::{Deserialize, Serialize};

use crate::trial::SaLabel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{preds} predictions for {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }

    pub fn metrics(&self) -> BinaryMetrics {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.r#fn);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        BinaryMetrics { accuracy: ratio(self.tp + self.tn, self.total()), f1, precision, recall }
    }
}

pub fn confusion(preds: &[SaLabel], labels: &[SaLabel]) -> Result<Confusion, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    let mut c = Confusion::default();
    for (p, l) in preds.iter().zip(labels) {
        match (p, l) {
            (SaLabel::Poor, SaLabel::Poor) => c.tp += 1,
            (SaLabel::Poor, SaLabel::Good) => c.fp += 1,
            (SaLabel::Good, SaLabel::Good) => c.tn += 1,
            (SaLabel::Good, SaLabel::Poor) => c.r#fn += 1,
        }
    }
    Ok(c)
}

pub fn evaluate(preds: &[SaLabel], labels: &[SaLabel]) -> Result<BinaryMetrics, EvalError> {
    Ok(confusion(preds, labels)?.metrics())
}

#[cfg(test)]
mod tests {
    use super::*;
    use SaLabel::{Good, Poor};

    #[test]
    fn perfect_predictions() {
        let y = [Good, Poor, Poor, Good];
        let m = evaluate(&y, &y).unwrap();
        assert_eq!(m, BinaryMetrics { accuracy: 1.0, f1: 1.0, precision: 1.0, recall: 1.0 });
    }

    #[test]
    fn all_good_predictions() {
        let labels: Vec<_> = std::iter::repeat_n(Poor, 75).chain(std::iter::repeat_n(Good, 105)).collect();
        let preds = vec![Good; 180];
        let m = evaluate(&preds, &labels).unwrap();
        assert!((m.accuracy - 105.0 / 180.0).abs() < 1e-12);
        assert_eq!((m.recall, m.f1, m.precision), (0.0, 0.0, 0.0));
    }

    #[test]
    fn one_of_each_error() {
        let preds = [Poor, Poor, Good];
        let labels = [Poor, Good, Poor];
        let m = evaluate(&preds, &labels).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn lengths_must_match() {
        assert_eq!(evaluate(&[Good], &[]), Err(EvalError::LengthMismatch { preds: 1, labels: 0 }));
    }
}
