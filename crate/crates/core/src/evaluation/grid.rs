use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GoalError, Result};
use crate::model::{fit, predict_proba, DataSet, FitConfig};

use super::metrics::{evaluate, mean_with_ci};
use super::splits::{make_splits, Split, SplitPlan};

/// Candidate values for the searched hyperparameters; everything else
/// comes from `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k: Vec<usize>,
    pub g: Vec<usize>,
    pub eps_cl: Vec<f64>,
    pub base: FitConfig,
}

impl GridSpec {
    /// Candidates in K-major, then G, then ε_CL order.
    pub fn candidates(&self) -> Vec<FitConfig> {
        let mut out = Vec::with_capacity(self.k.len() * self.g.len() * self.eps_cl.len());
        for &k in &self.k {
            for &g in &self.g {
                for &eps_cl in &self.eps_cl {
                    out.push(FitConfig {
                        k,
                        g,
                        eps_cl,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k.is_empty() || self.g.is_empty() || self.eps_cl.is_empty() {
            return Err(GoalError::config("grid needs at least one value for K, G and eps_cl"));
        }
        for c in self.candidates() {
            c.validate_for(d)?;
        }
        Ok(())
    }
}

/// Log-spaced values `10^lo ..= 10^hi` with `per_decade` points per decade.
pub fn log_grid(lo: i32, hi: i32, per_decade: usize) -> Vec<f64> {
    let steps = ((hi - lo) as usize) * per_decade.max(1);
    (0..=steps)
        .map(|i| 10f64.powf(lo as f64 + i as f64 / per_decade.max(1) as f64))
        .collect()
}

/// How predictions are scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Row of Π treated as the positive class.
    pub positive_row: usize,
    pub threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            positive_row: 0,
            threshold: 0.5,
        }
    }
}

/// Outcome of one candidate on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    /// AUC on the validation part when the split has one, else on the test part.
    pub selection_auc: f64,
    pub test_auc: f64,
    pub test_accuracy: f64,
    /// Solver iterations summed over restarts.
    pub iterations: usize,
    pub fit_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub config: FitConfig,
    pub parameter_count: usize,
    pub splits: Vec<SplitOutcome>,
    /// Mean selection AUC; the ranking criterion.
    pub mean_auc: f64,
    pub mean_test_auc: f64,
    /// 1.96 standard errors of the test AUC across splits.
    pub test_auc_ci: f64,
    pub mean_accuracy: f64,
    pub mean_iterations: f64,
    pub mean_fit_seconds: f64,
    pub failed: Option<String>,
}

impl GridRow {
    fn from_outcomes(config: FitConfig, parameter_count: usize, outcomes: Vec<Result<SplitOutcome>>) -> Self {
        let mut splits = Vec::with_capacity(outcomes.len());
        let mut failed = None;
        for o in outcomes {
            match o {
                Ok(s) => splits.push(s),
                Err(e) if failed.is_none() => failed = Some(format!("[{}] {e}", e.code())),
                Err(_) => {}
            }
        }
        let mean = |f: fn(&SplitOutcome) -> f64| {
            if failed.is_some() || splits.is_empty() {
                f64::NAN
            } else {
                splits.iter().map(f).sum::<f64>() / splits.len() as f64
            }
        };
        let test_aucs: Vec<f64> = splits.iter().map(|s| s.test_auc).collect();
        let (mean_test_auc, test_auc_ci) = if failed.is_some() {
            (f64::NAN, f64::NAN)
        } else {
            mean_with_ci(&test_aucs)
        };
        GridRow {
            parameter_count,
            mean_auc: mean(|s| s.selection_auc),
            mean_test_auc,
            test_auc_ci,
            mean_accuracy: mean(|s| s.test_accuracy),
            mean_iterations: mean(|s| s.iterations as f64),
            mean_fit_seconds: mean(|s| s.fit_seconds),
            splits,
            failed,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    /// Index of the row with the highest mean AUC (ties: fewer parameters,
    /// then fewer solver iterations, then earlier row); `None` if every row
    /// failed. Iterations stand in for fit time so the choice is reproducible.
    pub best: Option<usize>,
    pub n_splits: usize,
}

impl GridResult {
    pub fn best_row(&self) -> Option<&GridRow> {
        self.best.map(|i| &self.rows[i])
    }

    pub fn fit_count(&self) -> usize {
        self.rows.len() * self.n_splits
    }
}

/// Number of entries in R, S and Λ: `D·G + G·K + M·K`.
pub fn parameter_count(config: &FitConfig, d: usize, m: usize) -> usize {
    d * config.g + config.g * config.k + m * config.k
}

fn run_split(data: &DataSet, config: &FitConfig, split: &Split, opts: EvalOptions) -> Result<SplitOutcome> {
    let train = data.subset(&split.train)?;
    let start = Instant::now();
    let outcome = fit(&train, config)?;
    let fit_seconds = start.elapsed().as_secs_f64();

    let test = data.subset(&split.test)?;
    let test_metrics = evaluate(
        &predict_proba(&outcome.model, test.x())?,
        &test,
        opts.positive_row,
        opts.threshold,
    )?;
    let selection_auc = if split.validation.is_empty() {
        test_metrics.auc
    } else {
        let val = data.subset(&split.validation)?;
        evaluate(&predict_proba(&outcome.model, val.x())?, &val, opts.positive_row, opts.threshold)?.auc
    };
    Ok(SplitOutcome {
        selection_auc,
        test_auc: test_metrics.auc,
        test_accuracy: test_metrics.accuracy,
        iterations: outcome.report.restarts.iter().map(|r| r.iterations).sum(),
        fit_seconds,
    })
}

/// Fits every candidate on every training part of `plan` and scores it on
/// the held-out parts. Candidate × split tasks run on the rayon pool;
/// failures mark the affected row instead of aborting the search.
pub fn grid_search(data: &DataSet, grid: &GridSpec, plan: &SplitPlan, opts: EvalOptions) -> Result<GridResult> {
    grid.validate(data.d())?;
    let classes = data.class_indices();
    let splits = make_splits(data.t(), plan, Some(&classes))?;
    let candidates = grid.candidates();

    let tasks: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..splits.len()).map(move |s| (c, s)))
        .collect();
    let mut outcomes: Vec<Result<SplitOutcome>> = tasks
        .par_iter()
        .map(|&(c, s)| run_split(data, &candidates[c], &splits[s], opts))
        .collect();

    let mut rows = Vec::with_capacity(candidates.len());
    for config in candidates.into_iter().rev() {
        let row_outcomes = outcomes.split_off(outcomes.len() - splits.len());
        let params = parameter_count(&config, data.d(), data.m());
        rows.push(GridRow::from_outcomes(config, params, row_outcomes));
    }
    rows.reverse();

    let best = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.failed.is_none() && r.mean_auc.is_finite())
        .min_by(|(ia, a), (ib, b)| {
            b.mean_auc
                .total_cmp(&a.mean_auc)
                .then(a.parameter_count.cmp(&b.parameter_count))
                .then(a.mean_iterations.total_cmp(&b.mean_iterations))
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i);

    Ok(GridResult {
        rows,
        best,
        n_splits: splits.len(),
    })
}
