//! Synthetic benchmark data and time-series feature preparation.
//!
//! The "worms" generator places a minority class in a compact blob and the
//! majority class on an annulus around it, in the first two dimensions
//! only. All remaining dimensions are class-independent Gaussian noise with
//! a larger spread than the minority blob, so the problem is not
//! linearly separable and becomes a small-data problem as `D` grows.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GoalError, Result};
use crate::model::{one_hot_binary, DataSet};
use crate::numerics::{derive_seed, seeded_rng, Matrix};

/// Half-width of the annulus, in units of `signal_scale`.
pub const RING_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WormsSpec {
    pub t: usize,
    pub d: usize,
    /// Share of the minority (positive) class.
    pub minority_fraction: f64,
    /// Standard deviation of the uninformative dimensions.
    pub noise_scale: f64,
    /// Standard deviation of the minority blob.
    pub signal_scale: f64,
    /// Mid radius of the majority annulus, in units of `signal_scale`.
    pub ring_radius: f64,
    pub seed: u64,
}

impl Default for WormsSpec {
    fn default() -> Self {
        WormsSpec {
            t: 300,
            d: 10,
            minority_fraction: 1.0 / 3.0,
            noise_scale: 3.0,
            signal_scale: 1.0,
            ring_radius: 6.0,
            seed: 0,
        }
    }
}

impl WormsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(GoalError::config(format!("worms need D >= 2 (got {})", self.d)));
        }
        if self.t < 10 {
            return Err(GoalError::config(format!("worms need T >= 10 (got {})", self.t)));
        }
        if !(self.minority_fraction > 0.0 && self.minority_fraction < 1.0) {
            return Err(GoalError::config("minority_fraction must lie in (0, 1)"));
        }
        if !(self.noise_scale > 0.0 && self.signal_scale > 0.0) {
            return Err(GoalError::config("noise_scale and signal_scale must be positive"));
        }
        if !(self.ring_radius - RING_HALF_WIDTH > 3.0) {
            return Err(GoalError::config(format!(
                "ring_radius must exceed {} so the annulus clears the blob (got {})",
                3.0 + RING_HALF_WIDTH,
                self.ring_radius
            )));
        }
        let n_pos = self.positives();
        if n_pos == 0 || n_pos == self.t {
            return Err(GoalError::config("minority_fraction leaves one class empty"));
        }
        Ok(())
    }

    pub fn positives(&self) -> usize {
        (self.minority_fraction * self.t as f64).round() as usize
    }
}

/// Generates the worms data set; label 1 (Π row 0) is the minority class.
pub fn generate_worms(spec: &WormsSpec) -> Result<DataSet> {
    spec.validate()?;
    let n_pos = spec.positives();
    let mut order: Vec<usize> = (0..spec.t).collect();
    order.shuffle(&mut seeded_rng(derive_seed(spec.seed, 0)));

    let mut rng = seeded_rng(derive_seed(spec.seed, 1));
    let mut x = Matrix::zeros(spec.d, spec.t);
    let mut labels = vec![0u8; spec.t];
    let sigma = spec.signal_scale;
    for (i, &col) in order.iter().enumerate() {
        let positive = i < n_pos;
        let (a, b) = if positive {
            (
                sigma * rng.sample::<f64, _>(StandardNormal),
                sigma * rng.sample::<f64, _>(StandardNormal),
            )
        } else {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let radius = sigma
                * rng.random_range(spec.ring_radius - RING_HALF_WIDTH..spec.ring_radius + RING_HALF_WIDTH);
            (radius * angle.cos(), radius * angle.sin())
        };
        x[(0, col)] = a;
        x[(1, col)] = b;
        for d in 2..spec.d {
            x[(d, col)] = spec.noise_scale * rng.sample::<f64, _>(StandardNormal);
        }
        labels[col] = u8::from(positive);
    }
    DataSet::new(x, one_hot_binary(&labels)?)
}

/// Lags and lead time for turning a multivariate series into
/// (features, label) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagSpec {
    pub lags: Vec<usize>,
    /// Steps ahead at which the label is read.
    pub lead: usize,
    /// Labels are 1 where the index is strictly above this value.
    pub threshold: f64,
}

impl Default for LagSpec {
    fn default() -> Self {
        LagSpec {
            lags: vec![0, 1, 2, 3],
            lead: 0,
            threshold: 0.4,
        }
    }
}

impl LagSpec {
    pub fn max_lag(&self) -> usize {
        self.lags.iter().copied().max().unwrap_or(0)
    }

    /// Number of aligned samples for a series of length `n`.
    pub fn samples(&self, n: usize) -> Result<usize> {
        if self.lags.is_empty() {
            return Err(GoalError::config("at least one lag is required"));
        }
        let used = self.max_lag() + self.lead;
        if n <= used {
            return Err(GoalError::invalid(format!(
                "series of length {n} is too short for max lag {} and lead {}",
                self.max_lag(),
                self.lead
            )));
        }
        Ok(n - used)
    }
}

/// Stacks lagged copies of a `F × N` series. Output column `j` describes
/// time `t = j + max_lag` and holds the series at `t − lag` for each lag in
/// order; it pairs with the label read at `t + lead`.
pub fn lag_embed(series: &Matrix, spec: &LagSpec) -> Result<Matrix> {
    let n_out = spec.samples(series.ncols())?;
    let f = series.nrows();
    let offset = spec.max_lag();
    let mut out = Matrix::zeros(f * spec.lags.len(), n_out);
    for j in 0..n_out {
        let t = j + offset;
        for (block, &lag) in spec.lags.iter().enumerate() {
            out.view_mut((block * f, j), (f, 1))
                .copy_from(&series.column(t - lag));
        }
    }
    Ok(out)
}

/// Binary label probabilities aligned with [`lag_embed`]: class 1 (row 0)
/// where `index[t + lead] > threshold`.
pub fn threshold_labels(index: &[f64], spec: &LagSpec) -> Result<Matrix> {
    let n_out = spec.samples(index.len())?;
    let offset = spec.max_lag() + spec.lead;
    let labels: Vec<u8> = (0..n_out)
        .map(|j| u8::from(index[j + offset] > spec.threshold))
        .collect();
    one_hot_binary(&labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::auc;

    #[test]
    fn class_balance_is_exact() {
        let spec = WormsSpec {
            t: 301,
            ..WormsSpec::default()
        };
        let data = generate_worms(&spec).unwrap();
        let pos = data.binary_labels(0).iter().filter(|&&l| l == 1).count();
        assert_eq!(pos, 100);
    }

    #[test]
    fn radius_rule_separates_informative_plane() {
        let data = generate_worms(&WormsSpec::default()).unwrap();
        let labels = data.binary_labels(0);
        let threshold = 3.0;
        let hits = (0..data.t())
            .filter(|&t| {
                let r = data.x()[(0, t)].hypot(data.x()[(1, t)]);
                u8::from(r < threshold) == labels[t]
            })
            .count();
        assert!(hits as f64 / data.t() as f64 >= 0.95);
    }

    #[test]
    fn noise_dimensions_carry_no_signal() {
        let spec = WormsSpec {
            t: 1000,
            d: 4,
            seed: 5,
            ..WormsSpec::default()
        };
        let data = generate_worms(&spec).unwrap();
        let labels = data.binary_labels(0);
        let mut rng = seeded_rng(17);
        let mut best: f64 = 0.0;
        for _ in 0..1000 {
            let w: (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let scores: Vec<f64> = (0..data.t())
                .map(|t| w.0 * data.x()[(2, t)] + w.1 * data.x()[(3, t)])
                .collect();
            best = best.max(auc(&scores, &labels).unwrap());
        }
        assert!(best <= 0.6, "best random linear AUC {best}");
    }

    #[test]
    fn generator_is_seeded() {
        let a = generate_worms(&WormsSpec::default()).unwrap();
        let b = generate_worms(&WormsSpec::default()).unwrap();
        assert_eq!(a, b);
        let c = generate_worms(&WormsSpec {
            seed: 1,
            ..WormsSpec::default()
        })
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn worms_reject_bad_spec() {
        assert!(generate_worms(&WormsSpec { d: 1, ..WormsSpec::default() }).is_err());
        assert!(generate_worms(&WormsSpec { t: 5, ..WormsSpec::default() }).is_err());
        assert!(generate_worms(&WormsSpec { ring_radius: 3.2, ..WormsSpec::default() }).is_err());
    }

    #[test]
    fn identity_embedding() {
        let series = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let spec = LagSpec {
            lags: vec![0],
            ..LagSpec::default()
        };
        assert_eq!(lag_embed(&series, &spec).unwrap(), series);
    }

    #[test]
    fn two_lag_embedding() {
        let series = Matrix::from_row_slice(1, 5, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let spec = LagSpec {
            lags: vec![0, 1],
            ..LagSpec::default()
        };
        let out = lag_embed(&series, &spec).unwrap();
        assert_eq!(out, Matrix::from_row_slice(2, 4, &[2.0, 3.0, 4.0, 5.0, 1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn default_lags_stack_four_copies() {
        let series = Matrix::zeros(2, 10);
        assert_eq!(lag_embed(&series, &LagSpec::default()).unwrap().nrows(), 8);
        assert!(lag_embed(&Matrix::zeros(2, 3), &LagSpec::default()).is_err());
    }

    #[test]
    fn threshold_is_strict_and_aligned() {
        let zero_lag = |lead| LagSpec {
            lags: vec![0],
            lead,
            threshold: 0.4,
        };
        assert_eq!(
            threshold_labels(&[0.5, 0.3], &zero_lag(0)).unwrap(),
            one_hot_binary(&[1, 0]).unwrap()
        );
        assert_eq!(
            threshold_labels(&[0.4], &zero_lag(0)).unwrap(),
            one_hot_binary(&[0]).unwrap()
        );
        let lead2 = threshold_labels(&[0.0, 0.0, 0.5, 0.5], &zero_lag(2)).unwrap();
        assert_eq!(lead2, one_hot_binary(&[1, 1]).unwrap());
    }

    #[test]
    fn features_and_labels_align() {
        for (n, lead) in [(12, 0), (12, 3), (30, 6)] {
            let spec = LagSpec {
                lead,
                ..LagSpec::default()
            };
            let x = lag_embed(&Matrix::zeros(3, n), &spec).unwrap();
            let y = threshold_labels(&vec![0.0; n], &spec).unwrap();
            assert_eq!(x.ncols(), y.ncols());
            assert_eq!(x.ncols(), n - 3 - lead);
        }
    }
}
