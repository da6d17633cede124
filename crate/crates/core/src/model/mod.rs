//! The gauge-optimal classifier: problem data, model parameters, the four
//! closed-form substeps, the alternating fit loop, and prediction.
//!
//! Minimized functional, for one-hot affiliations Γ (K × T):
//!
//! ```text
//! L = 1/T Σ_t ‖x_t − R s_k(t)‖² − ε_CL/(T M) Σ_t Σ_m Π_{m,t} log Λ_{m,k(t)}
//! ```
//!
//! subject to `RᵀR = I_G`, Λ column-stochastic and every instance in
//! exactly one box.

mod fit;
mod predict;
mod steps;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{GoalError, Result};
use crate::numerics::{self, ensure_finite, Matrix};

pub use fit::{fit, FitOutcome, RestartSummary, SolverState, StepRecord};
pub use predict::{assign_boxes, labels_from_proba, predict_labels, predict_proba};
pub use steps::{
    cluster_sums, gamma_step, lambda_step, objective, objective_terms, r_step, rotation_objective,
    s_step, SStep,
};

/// Tolerance on column sums of stochastic matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Features `X` (D × T, one column per instance) and label probabilities
/// `Π` (M × T, column-stochastic).
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    x: Matrix,
    pi: Matrix,
}

impl DataSet {
    pub fn new(x: Matrix, pi: Matrix) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(GoalError::invalid(format!(
                "data set needs D >= 1 and T >= 1 (got D={}, T={})",
                x.nrows(),
                x.ncols()
            )));
        }
        if pi.ncols() != x.ncols() {
            return Err(GoalError::invalid(format!(
                "features have {} instances but labels have {}",
                x.ncols(),
                pi.ncols()
            )));
        }
        if pi.nrows() == 0 {
            return Err(GoalError::invalid("labels need at least one class row"));
        }
        ensure_finite(&x, "features")?;
        check_stochastic(&pi, "label probabilities")?;
        Ok(DataSet { x, pi })
    }

    /// Binary data set from 0/1 labels; row 0 of Π is the class labelled 1.
    pub fn from_binary_labels(x: Matrix, labels: &[u8]) -> Result<Self> {
        let pi = one_hot_binary(labels)?;
        DataSet::new(x, pi)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn pi(&self) -> &Matrix {
        &self.pi
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn t(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.pi.nrows()
    }

    /// Data set restricted to the given instance indices, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<DataSet> {
        if idx.is_empty() {
            return Err(GoalError::invalid("empty subset"));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.t()) {
            return Err(GoalError::invalid(format!(
                "subset index {bad} out of range (T={})",
                self.t()
            )));
        }
        Ok(DataSet {
            x: self.x.select_columns(idx),
            pi: self.pi.select_columns(idx),
        })
    }

    /// Most probable class row per instance (ties: lowest row).
    pub fn class_indices(&self) -> Vec<usize> {
        self.pi.column_iter().map(|c| argmax(c.iter().copied())).collect()
    }

    /// 1 where `positive_row` is the most probable class, else 0.
    pub fn binary_labels(&self, positive_row: usize) -> Vec<u8> {
        self.class_indices()
            .into_iter()
            .map(|c| u8::from(c == positive_row))
            .collect()
    }
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Two-row one-hot expansion of 0/1 labels: label 1 → row 0, label 0 → row 1.
pub fn one_hot_binary(labels: &[u8]) -> Result<Matrix> {
    let mut pi = Matrix::zeros(2, labels.len());
    for (t, &l) in labels.iter().enumerate() {
        match l {
            1 => pi[(0, t)] = 1.0,
            0 => pi[(1, t)] = 1.0,
            other => {
                return Err(GoalError::invalid(format!(
                    "binary label at instance {t} is {other}, expected 0 or 1"
                )))
            }
        }
    }
    Ok(pi)
}

pub(crate) fn check_stochastic(m: &Matrix, what: &str) -> Result<()> {
    for (c, col) in m.column_iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(GoalError::invalid(format!(
                    "{what}: entry {v} at row {r}, column {c} is outside [0, 1]"
                )));
            }
        }
        let sum = col.sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(GoalError::invalid(format!(
                "{what}: column {c} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Discrete box affiliation: each instance belongs to exactly one of `k` boxes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affiliation {
    k: usize,
    assignments: Vec<usize>,
}

impl Affiliation {
    pub fn new(k: usize, assignments: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(GoalError::invalid("affiliation needs K >= 1"));
        }
        if let Some((t, &a)) = assignments.iter().enumerate().find(|(_, &a)| a >= k) {
            return Err(GoalError::invalid(format!(
                "instance {t} assigned to box {a}, but K={k}"
            )));
        }
        Ok(Affiliation { k, assignments })
    }

    pub fn random(k: usize, t: usize, seed: u64) -> Result<Self> {
        Ok(Affiliation {
            k,
            assignments: numerics::random_assignments(k, t, seed)?,
        })
    }

    /// Parses a K × T matrix whose columns must be exactly one-hot.
    pub fn from_matrix(gamma: &Matrix) -> Result<Self> {
        let mut assignments = Vec::with_capacity(gamma.ncols());
        for (t, col) in gamma.column_iter().enumerate() {
            let mut hot = None;
            for (k, &v) in col.iter().enumerate() {
                if v == 1.0 && hot.is_none() {
                    hot = Some(k);
                } else if v != 0.0 {
                    return Err(GoalError::invalid(format!(
                        "affiliation column {t} is not one-hot (row {k} = {v})"
                    )));
                }
            }
            assignments.push(hot.ok_or_else(|| {
                GoalError::invalid(format!("affiliation column {t} has no active box"))
            })?);
        }
        Affiliation::new(gamma.nrows(), assignments)
    }

    pub fn to_matrix(&self) -> Matrix {
        let mut gamma = Matrix::zeros(self.k, self.assignments.len());
        for (t, &k) in self.assignments.iter().enumerate() {
            gamma[(k, t)] = 1.0;
        }
        gamma
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &a in &self.assignments {
            counts[a] += 1;
        }
        counts
    }
}

/// Learned parameters: gauge rotation `R` (D × G), box coordinates `S`
/// (G × K) and box label probabilities `Λ` (M × K).
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeModel {
    pub r: Matrix,
    pub s: Matrix,
    pub lambda: Matrix,
    pub eps_cl: f64,
    pub lambda_floor: f64,
}

impl GaugeModel {
    /// Checks shapes and the feasibility of `R` and `Λ`.
    pub fn new(r: Matrix, s: Matrix, lambda: Matrix, eps_cl: f64, lambda_floor: f64) -> Result<Self> {
        let model = GaugeModel {
            r,
            s,
            lambda,
            eps_cl,
            lambda_floor,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let (d, g) = self.r.shape();
        if d == 0 || g == 0 || g > d {
            return Err(GoalError::invalid(format!("rotation has invalid shape {d}x{g}")));
        }
        if self.s.nrows() != g {
            return Err(GoalError::invalid(format!(
                "box coordinates have {} rows, rotation has {g} columns",
                self.s.nrows()
            )));
        }
        if self.lambda.ncols() != self.s.ncols() || self.s.ncols() == 0 {
            return Err(GoalError::invalid(format!(
                "label table has {} boxes, box coordinates have {}",
                self.lambda.ncols(),
                self.s.ncols()
            )));
        }
        if !(self.eps_cl >= 0.0 && self.eps_cl.is_finite()) {
            return Err(GoalError::invalid("eps_cl must be finite and nonnegative"));
        }
        if !(self.lambda_floor > 0.0 && self.lambda_floor < 1.0) {
            return Err(GoalError::invalid("lambda_floor must lie in (0, 1)"));
        }
        ensure_finite(&self.r, "rotation")?;
        ensure_finite(&self.s, "box coordinates")?;
        let ortho = self.orthonormality_error();
        if ortho > 1e-8 {
            return Err(GoalError::invalid(format!(
                "rotation columns are not orthonormal (‖RᵀR − I‖ = {ortho:e})"
            )));
        }
        check_stochastic(&self.lambda, "box label probabilities")
    }

    pub fn d(&self) -> usize {
        self.r.nrows()
    }

    pub fn g(&self) -> usize {
        self.r.ncols()
    }

    pub fn k(&self) -> usize {
        self.s.ncols()
    }

    pub fn m(&self) -> usize {
        self.lambda.nrows()
    }

    /// Box centres in the original feature space, `R S` (D × K).
    pub fn box_images(&self) -> Matrix {
        &self.r * &self.s
    }

    /// Frobenius norm of `RᵀR − I_G`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.g();
        (self.r.transpose() * &self.r - Matrix::identity(g, g)).norm()
    }

    /// Entries of R, S and Λ: `D·G + G·K + M·K`.
    pub fn parameter_count(&self) -> usize {
        self.d() * self.g() + self.g() * self.k() + self.m() * self.k()
    }
}

/// Solver settings for [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Number of discretization boxes.
    pub k: usize,
    /// Gauge dimension (columns of R).
    pub g: usize,
    pub eps_cl: f64,
    /// Stop when the objective decreases by no more than this.
    pub tol: f64,
    /// Probabilities are floored here before taking logarithms.
    pub lambda_floor: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    pub seed: u64,
    /// Accepted for compatibility with entropic variants; not part of this
    /// objective and ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_e: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k: 4,
            g: 2,
            eps_cl: 1.0,
            tol: 1e-8,
            lambda_floor: 1e-12,
            max_iter: 500,
            n_restarts: 10,
            seed: 0,
            eps_e: None,
        }
    }
}

impl FitConfig {
    /// Dimension-independent checks.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(GoalError::config("K must be at least 1"));
        }
        if self.g == 0 {
            return Err(GoalError::config("G must be at least 1"));
        }
        if !(self.eps_cl >= 0.0 && self.eps_cl.is_finite()) {
            return Err(GoalError::config(format!(
                "eps_cl must be finite and nonnegative (got {})",
                self.eps_cl
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(GoalError::config(format!("tol must be positive (got {})", self.tol)));
        }
        if !(self.lambda_floor > 0.0 && self.lambda_floor < 1.0) {
            return Err(GoalError::config(format!(
                "lambda_floor must lie in (0, 1) (got {})",
                self.lambda_floor
            )));
        }
        if self.max_iter == 0 {
            return Err(GoalError::config("max_iter must be at least 1"));
        }
        if self.n_restarts == 0 {
            return Err(GoalError::config("n_restarts must be at least 1"));
        }
        Ok(())
    }

    pub fn validate_for(&self, d: usize) -> Result<()> {
        self.validate()?;
        if self.g > d {
            return Err(GoalError::config(format!(
                "G={} exceeds the feature dimension D={d}",
                self.g
            )));
        }
        Ok(())
    }
}

/// Per-fit diagnostics for the restart that was kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Objective after each iteration of the kept restart.
    pub objective_trace: Vec<f64>,
    /// 1-based iterations in which an empty box was re-seeded.
    pub reseed_iterations: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index_of_best: usize,
    /// Objective of the returned model (after a final box update).
    pub final_objective: f64,
    pub restarts: Vec<RestartSummary>,
}

/// Column sums of a matrix, handy for feasibility checks.
pub fn column_sums(m: &Matrix) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}
