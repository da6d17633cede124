use serde::{Deserialize, Serialize};

use crate::error::{GoalError, Result};
use crate::model::{labels_from_proba, DataSet};
use crate::numerics::Matrix;

/// Scores of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub accuracy: f64,
    /// `confusion[truth][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub n_test: usize,
}

/// Area under the ROC curve as the Mann–Whitney statistic: the probability
/// that a random positive scores above a random negative, ties counting ½.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(GoalError::invalid(format!(
            "auc: {} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(GoalError::invalid(format!("auc: score {i} is NaN")));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.iter().filter(|&&l| l == 0).count();
    if n_pos + n_neg != labels.len() {
        return Err(GoalError::invalid("auc: labels must be 0 or 1"));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(GoalError::UndefinedMetric(format!(
            "auc needs both classes (positives={n_pos}, negatives={n_neg})"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Average ranks over tie groups; ranks are 1-based.
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let group_pos = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        pos_rank_sum += avg_rank * group_pos as f64;
        start = end;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    let u = pos_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * n))
}

/// Fraction of exact matches.
pub fn accuracy<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(GoalError::invalid(format!(
            "accuracy: {} predictions but {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(GoalError::invalid("accuracy: empty input"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

pub fn confusion(predicted: &[usize], truth: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0; n_classes]; n_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        table[t][p] += 1;
    }
    table
}

/// Metrics of predicted probabilities against the labels of `data`.
///
/// AUC scores the probability of `positive_row` against membership of that
/// class. For two classes, labels and confusion use the binary encoding
/// (1 = positive); with more classes they use class row indices.
pub fn evaluate(proba: &Matrix, data: &DataSet, positive_row: usize, threshold: f64) -> Result<Metrics> {
    if proba.shape() != data.pi().shape() {
        return Err(GoalError::invalid(format!(
            "predictions are {}x{}, labels are {}x{}",
            proba.nrows(),
            proba.ncols(),
            data.m(),
            data.t()
        )));
    }
    if positive_row >= data.m() {
        return Err(GoalError::invalid(format!(
            "positive class row {positive_row} out of range (M={})",
            data.m()
        )));
    }
    let scores: Vec<f64> = proba.row(positive_row).iter().copied().collect();
    let binary = data.binary_labels(positive_row);
    let auc = auc(&scores, &binary)?;

    let predicted = labels_from_proba(proba, threshold, positive_row)?;
    let (truth, n_classes): (Vec<usize>, usize) = if data.m() == 2 {
        (binary.iter().map(|&b| b as usize).collect(), 2)
    } else {
        (data.class_indices(), data.m())
    };
    Ok(Metrics {
        auc,
        accuracy: accuracy(&predicted, &truth)?,
        confusion: confusion(&predicted, &truth, n_classes),
        n_test: data.t(),
    })
}

/// Mean and 95% half-width (1.96 standard errors) of a sample.
pub fn mean_with_ci(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::one_hot_binary;
    use proptest::prelude::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.8, 0.6, 0.4, 0.2], &[1, 0, 1, 0]).unwrap(), 0.75);
    }

    #[test]
    fn auc_needs_both_classes() {
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(GoalError::UndefinedMetric(_))));
        assert!(auc(&[0.1], &[1, 0]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 1, 1, 0]).unwrap(), 0.5);
        assert!(accuracy(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn evaluate_confusion_trace_matches_accuracy() {
        let data = DataSet::new(Matrix::zeros(1, 4), one_hot_binary(&[1, 0, 1, 0]).unwrap()).unwrap();
        let proba = Matrix::from_row_slice(2, 4, &[0.9, 0.6, 0.2, 0.1, 0.1, 0.4, 0.8, 0.9]);
        let m = evaluate(&proba, &data, 0, 0.5).unwrap();
        let diag: usize = (0..2).map(|i| m.confusion[i][i]).sum();
        assert_eq!(m.accuracy, diag as f64 / m.n_test as f64);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.auc, 0.75);
    }

    #[test]
    fn ci_of_constant_sample_is_zero() {
        assert_eq!(mean_with_ci(&[0.75, 0.75, 0.75]), (0.75, 0.0));
    }

    proptest! {
        #[test]
        fn auc_invariant_under_monotone_transform(
            raw in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let mut labels: Vec<u8> = raw.iter().map(|r| u8::from(r.1)).collect();
            labels[0] = 1;
            labels[1] = 0;
            let base = auc(&scores, &labels).unwrap();
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert!((auc(&warped, &labels).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn auc_complement_sums_to_one(
            raw in prop::collection::btree_map(0u32..100_000, any::<bool>(), 2..40)
        ) {
            // Distinct keys give tie-free scores.
            let scores: Vec<f64> = raw.keys().map(|&k| k as f64).collect();
            let mut labels: Vec<u8> = raw.values().map(|&b| u8::from(b)).collect();
            labels[0] = 1;
            labels[1] = 0;
            let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
            let total = auc(&scores, &labels).unwrap() + auc(&scores, &flipped).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
