//! Gauge-optimal approximate learning (GOAL) for small-data classification.
//!
//! The classifier rotates features into a low-dimensional gauge, splits the
//! rotated space into discrete boxes and learns per-box label
//! probabilities, all by alternating closed-form updates that never
//! increase the objective.

pub mod bench;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod io;
pub mod evaluation;
pub mod model;
pub mod numerics;

pub use error::{GoalError, Result};
pub use model::{fit, predict_proba, Affiliation, DataSet, FitConfig, FitReport, GaugeModel};
pub use numerics::Matrix;
