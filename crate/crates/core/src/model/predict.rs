use crate::error::{GoalError, Result};
use crate::numerics::{ensure_finite, Matrix};

use super::{argmax, GaugeModel};

/// Nearest box image (Euclidean, ties to the lowest index) for every column
/// of `x`. Labels are not used: at prediction time they are unknown.
pub fn assign_boxes(model: &GaugeModel, x: &Matrix) -> Result<Vec<usize>> {
    if x.nrows() != model.d() {
        return Err(GoalError::invalid(format!(
            "features have {} rows, model expects D={}",
            x.nrows(),
            model.d()
        )));
    }
    ensure_finite(x, "features")?;
    let images = model.box_images();
    Ok(x
        .column_iter()
        .map(|col| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, img) in images.column_iter().enumerate() {
                let d = (col - img).norm_squared();
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            best
        })
        .collect())
}

/// Class probabilities (M × T'): the label column Λ of each point's box.
pub fn predict_proba(model: &GaugeModel, x: &Matrix) -> Result<Matrix> {
    let boxes = assign_boxes(model, x)?;
    Ok(model.lambda.select_columns(&boxes))
}

/// Turns probability columns into labels.
///
/// With two classes the result is binary: 1 when the probability of
/// `positive_row` exceeds `threshold` (strictly), else 0. With more classes
/// the result is the most probable row index and `threshold` is unused.
pub fn labels_from_proba(proba: &Matrix, threshold: f64, positive_row: usize) -> Result<Vec<usize>> {
    if proba.nrows() == 2 {
        if positive_row >= 2 {
            return Err(GoalError::invalid(format!(
                "positive class row {positive_row} out of range for two classes"
            )));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(GoalError::invalid(format!(
                "threshold must lie in (0, 1) (got {threshold})"
            )));
        }
        Ok(proba
            .column_iter()
            .map(|c| usize::from(c[positive_row] > threshold))
            .collect())
    } else {
        Ok(proba.column_iter().map(|c| argmax(c.iter().copied())).collect())
    }
}

/// Labels for new points, with row 0 as the positive class.
pub fn predict_labels(model: &GaugeModel, x: &Matrix, threshold: f64) -> Result<Vec<usize>> {
    labels_from_proba(&predict_proba(model, x)?, threshold, 0)
}
