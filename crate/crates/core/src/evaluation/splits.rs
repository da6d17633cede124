use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{GoalError, Result};
use crate::numerics::{derive_seed, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    /// Independent random train/(validation/)test partitions, one per replicate.
    RandomHoldout,
    /// K-fold cross-validation: every instance is tested exactly once.
    Kfold,
    /// Single split in time order: training strictly precedes testing.
    Temporal,
}

/// How instances are divided for training and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitPlan {
    pub kind: SplitKind,
    /// Share of instances used for training (holdout and temporal).
    pub train_fraction: f64,
    /// Share held out for model selection; 0 disables the validation part.
    pub validation_fraction: f64,
    pub folds: usize,
    /// Number of random holdout replicates.
    pub replicates: usize,
    /// Keep class proportions in every part.
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            kind: SplitKind::RandomHoldout,
            train_fraction: 0.75,
            validation_fraction: 0.0,
            folds: 5,
            replicates: 20,
            stratified: true,
            seed: 0,
        }
    }
}

/// Instance indices of one split, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| f > 0.0 && f < 1.0;
        match self.kind {
            SplitKind::RandomHoldout | SplitKind::Temporal => {
                if !frac_ok(self.train_fraction) {
                    return Err(GoalError::config(format!(
                        "train_fraction must lie in (0, 1) (got {})",
                        self.train_fraction
                    )));
                }
                if !(self.validation_fraction >= 0.0
                    && self.train_fraction + self.validation_fraction < 1.0)
                {
                    return Err(GoalError::config(format!(
                        "validation_fraction {} leaves no test data",
                        self.validation_fraction
                    )));
                }
                if self.kind == SplitKind::RandomHoldout && self.replicates == 0 {
                    return Err(GoalError::config("replicates must be at least 1"));
                }
            }
            SplitKind::Kfold => {
                if self.folds < 2 {
                    return Err(GoalError::config("kfold needs at least 2 folds"));
                }
                if self.validation_fraction != 0.0 {
                    return Err(GoalError::config(
                        "validation_fraction is only supported for holdout and temporal splits",
                    ));
                }
            }
        }
        Ok(())
    }
}

fn class_groups(t: usize, labels: Option<&[usize]>, stratified: bool) -> Result<Vec<Vec<usize>>> {
    match (stratified, labels) {
        (true, Some(labels)) => {
            if labels.len() != t {
                return Err(GoalError::invalid(format!(
                    "stratification labels cover {} instances, expected {t}",
                    labels.len()
                )));
            }
            let n_classes = labels.iter().max().map_or(0, |m| m + 1);
            let mut groups = vec![Vec::new(); n_classes];
            for (i, &c) in labels.iter().enumerate() {
                groups[c].push(i);
            }
            groups.retain(|g| !g.is_empty());
            Ok(groups)
        }
        (true, None) => Err(GoalError::config("stratified split requires class labels")),
        (false, _) => Ok(vec![(0..t).collect()]),
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Train/validation/test index sets for `t` instances.
///
/// `labels` (class index per instance) is needed when the plan is
/// stratified and ignored otherwise. Deterministic for a fixed seed.
pub fn make_splits(t: usize, plan: &SplitPlan, labels: Option<&[usize]>) -> Result<Vec<Split>> {
    plan.validate()?;
    let splits = match plan.kind {
        SplitKind::Temporal => {
            let n_train = (plan.train_fraction * t as f64).round() as usize;
            let n_val = (plan.validation_fraction * t as f64).round() as usize;
            vec![Split {
                train: (0..n_train).collect(),
                validation: (n_train..(n_train + n_val).min(t)).collect(),
                test: ((n_train + n_val).min(t)..t).collect(),
            }]
        }
        SplitKind::RandomHoldout => {
            let groups = class_groups(t, labels, plan.stratified)?;
            (0..plan.replicates)
                .map(|rep| {
                    let mut rng = seeded_rng(derive_seed(plan.seed, rep as u64));
                    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
                    for group in &groups {
                        let mut members = group.clone();
                        members.shuffle(&mut rng);
                        let n = members.len() as f64;
                        let n_train = (plan.train_fraction * n).round() as usize;
                        let n_val = ((plan.validation_fraction * n).round() as usize)
                            .min(members.len() - n_train);
                        train.extend_from_slice(&members[..n_train]);
                        validation.extend_from_slice(&members[n_train..n_train + n_val]);
                        test.extend_from_slice(&members[n_train + n_val..]);
                    }
                    Split {
                        train: sorted(train),
                        validation: sorted(validation),
                        test: sorted(test),
                    }
                })
                .collect()
        }
        SplitKind::Kfold => {
            if plan.folds > t {
                return Err(GoalError::config(format!(
                    "{} folds requested for {t} instances",
                    plan.folds
                )));
            }
            let groups = class_groups(t, labels, plan.stratified)?;
            let mut rng = seeded_rng(plan.seed);
            let mut dealt = Vec::with_capacity(t);
            for group in &groups {
                let mut members = group.clone();
                members.shuffle(&mut rng);
                dealt.extend(members);
            }
            let mut fold_of = vec![0usize; t];
            for (pos, &i) in dealt.iter().enumerate() {
                fold_of[i] = pos % plan.folds;
            }
            (0..plan.folds)
                .map(|f| Split {
                    train: (0..t).filter(|&i| fold_of[i] != f).collect(),
                    validation: Vec::new(),
                    test: (0..t).filter(|&i| fold_of[i] == f).collect(),
                })
                .collect()
        }
    };
    for (i, s) in splits.iter().enumerate() {
        if s.train.is_empty() || s.test.is_empty() {
            return Err(GoalError::config(format!(
                "split {i} has {} training and {} test instances; plan is infeasible for T={t}",
                s.train.len(),
                s.test.len()
            )));
        }
    }
    Ok(splits)
}
