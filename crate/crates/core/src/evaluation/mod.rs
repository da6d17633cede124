//! Metrics, resampling plans and hyperparameter search.

mod grid;
mod metrics;
mod splits;

pub use grid::{
    grid_search, log_grid, parameter_count, EvalOptions, GridResult, GridRow, GridSpec, SplitOutcome,
};
pub use metrics::{accuracy, auc, confusion, evaluate, mean_with_ci, Metrics};
pub use splits::{make_splits, Split, SplitKind, SplitPlan};
