//! Run configuration: an optional TOML file layered under command-line
//! flags. Every section is a set of optional overrides, so precedence is
//! flag > file > built-in default, resolved field by field.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::datagen::WormsSpec;
use crate::error::{GoalError, Result};
use crate::evaluation::{log_grid, GridSpec, SplitKind, SplitPlan};
use crate::model::FitConfig;

use super::table::Orientation;

/// Field-wise `over.or(base)` for every listed field.
macro_rules! layer_fields {
    ($base:expr, $over:expr; $($f:ident),+) => {
        Self { $($f: $over.$f.clone().or_else(|| $base.$f.clone())),+ }
    };
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct DataOverrides {
    /// Features file (delimiter-separated)
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Labels file: one 0/1 column or M probability columns
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// What one row of the features file holds
    #[arg(long, value_enum)]
    pub rows: Option<Orientation>,
}

impl DataOverrides {
    pub fn layer(&self, over: &Self) -> Self {
        layer_fields!(self, over; features, labels, rows)
    }

    pub fn features(&self) -> Result<&Path> {
        self.features
            .as_deref()
            .ok_or_else(|| GoalError::config("no features file given (--features or [data].features)"))
    }

    pub fn labels(&self) -> Result<&Path> {
        self.labels
            .as_deref()
            .ok_or_else(|| GoalError::config("no labels file given (--labels or [data].labels)"))
    }

    pub fn orientation(&self) -> Orientation {
        self.rows.unwrap_or_default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct FitOverrides {
    /// Number of discretization boxes K
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Gauge dimension G (at most D)
    #[arg(long = "G")]
    pub g: Option<usize>,
    /// Weight ε_CL of the label term
    #[arg(long)]
    pub eps_cl: Option<f64>,
    /// Stop once the objective decreases by at most this much
    #[arg(long)]
    pub tol: Option<f64>,
    /// Floor applied to Λ before taking logs
    #[arg(long)]
    pub lambda_floor: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Independent random starts; the lowest final objective wins
    #[arg(long = "restarts")]
    pub n_restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Accepted for compatibility and ignored
    #[arg(long, hide = true)]
    pub eps_e: Option<f64>,
}

impl FitOverrides {
    pub fn layer(&self, over: &Self) -> Self {
        layer_fields!(self, over; k, g, eps_cl, tol, lambda_floor, max_iter, n_restarts, seed, eps_e)
    }

    pub fn resolve(&self) -> FitConfig {
        let d = FitConfig::default();
        FitConfig {
            k: self.k.unwrap_or(d.k),
            g: self.g.unwrap_or(d.g),
            eps_cl: self.eps_cl.unwrap_or(d.eps_cl),
            tol: self.tol.unwrap_or(d.tol),
            lambda_floor: self.lambda_floor.unwrap_or(d.lambda_floor),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            n_restarts: self.n_restarts.unwrap_or(d.n_restarts),
            seed: self.seed.unwrap_or(d.seed),
            eps_e: self.eps_e.or(d.eps_e),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SplitOverrides {
    #[arg(long = "split", value_enum)]
    pub kind: Option<SplitKind>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Share held out for model selection (0 selects on the test part)
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub stratified: Option<bool>,
    #[arg(long = "split-seed", id = "split_seed")]
    pub seed: Option<u64>,
}

impl SplitOverrides {
    pub fn layer(&self, over: &Self) -> Self {
        layer_fields!(self, over; kind, train_fraction, validation_fraction, folds, replicates, stratified, seed)
    }

    pub fn resolve(&self) -> SplitPlan {
        let d = SplitPlan::default();
        SplitPlan {
            kind: self.kind.unwrap_or(d.kind),
            train_fraction: self.train_fraction.unwrap_or(d.train_fraction),
            validation_fraction: self.validation_fraction.unwrap_or(d.validation_fraction),
            folds: self.folds.unwrap_or(d.folds),
            replicates: self.replicates.unwrap_or(d.replicates),
            stratified: self.stratified.unwrap_or(d.stratified),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct GridOverrides {
    /// Candidate K values (default 2..=10)
    #[arg(long = "grid-K", id = "grid_k", value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Candidate G values (default 2,3)
    #[arg(long = "grid-G", id = "grid_g", value_delimiter = ',')]
    pub g: Option<Vec<usize>>,
    /// Candidate ε_CL values (default 0.01,0.1,1,10,100)
    #[arg(long = "grid-eps-cl", id = "grid_eps_cl", value_delimiter = ',')]
    pub eps_cl: Option<Vec<f64>>,
}

impl GridOverrides {
    pub fn layer(&self, over: &Self) -> Self {
        layer_fields!(self, over; k, g, eps_cl)
    }

    pub fn resolve(&self, base: FitConfig) -> GridSpec {
        GridSpec {
            k: self.k.clone().unwrap_or_else(|| (2..=10).collect()),
            g: self.g.clone().unwrap_or_else(|| vec![2, 3]),
            eps_cl: self.eps_cl.clone().unwrap_or_else(|| log_grid(-2, 2, 1)),
            base,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct WormsOverrides {
    /// Number of instances T
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Number of features D (at least 2)
    #[arg(long = "D")]
    pub d: Option<usize>,
    #[arg(long)]
    pub minority_fraction: Option<f64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long)]
    pub signal_scale: Option<f64>,
    #[arg(long)]
    pub ring_radius: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl WormsOverrides {
    pub fn layer(&self, over: &Self) -> Self {
        layer_fields!(self, over; t, d, minority_fraction, noise_scale, signal_scale, ring_radius, seed)
    }

    pub fn resolve(&self) -> WormsSpec {
        let d = WormsSpec::default();
        WormsSpec {
            t: self.t.unwrap_or(d.t),
            d: self.d.unwrap_or(d.d),
            minority_fraction: self.minority_fraction.unwrap_or(d.minority_fraction),
            noise_scale: self.noise_scale.unwrap_or(d.noise_scale),
            signal_scale: self.signal_scale.unwrap_or(d.signal_scale),
            ring_radius: self.ring_radius.unwrap_or(d.ring_radius),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

/// Contents of a `--config` file. Relative paths are taken as given, i.e.
/// relative to the working directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataOverrides,
    pub fit: FitOverrides,
    pub split: SplitOverrides,
    pub grid: GridOverrides,
    pub worms: WormsOverrides,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GoalError::config(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GoalError::io(path, e))?;
        Self::parse(&text).map_err(|e| GoalError::config(format!("{}: {e}", path.display())))
    }

    /// The file named by `path`, or an empty configuration.
    pub fn load_optional(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
