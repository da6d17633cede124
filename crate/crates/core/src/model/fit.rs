use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GoalError, Result};
use crate::numerics::{derive_seed, random_orthonormal, tr_mul, Matrix};

use super::steps::{assign, cluster_sums, lambda_step, objective, r_step_from_sums, s_step, s_step_from_sums};
use super::{Affiliation, DataSet, FitConfig, FitReport, GaugeModel};

/// Result of [`fit`]: the best restart's model, its final affiliation and
/// diagnostics.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: GaugeModel,
    pub affiliation: Affiliation,
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub seed: u64,
    pub objective_trace: Vec<f64>,
    pub reseed_iterations: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
}

/// What one iteration of the alternating scheme did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub objective: f64,
    /// An empty box was re-seeded during the box update.
    pub reseeded: bool,
}

/// Iterate-level state of one restart. `fit` drives it until convergence;
/// benchmarks drive it for a fixed number of iterations.
#[derive(Debug, Clone)]
pub struct SolverState<'a> {
    data: &'a DataSet,
    config: FitConfig,
    r: Matrix,
    s: Matrix,
    lambda: Matrix,
    gamma: Affiliation,
    iteration: usize,
    /// Cluster sums and occupancies of `gamma`, kept from the rotation update.
    sums: Option<(Matrix, Vec<usize>)>,
}

impl<'a> SolverState<'a> {
    /// Random feasible start: uniform box affiliations and a random
    /// orthonormal rotation, with Λ matched to the affiliations.
    pub fn init(data: &'a DataSet, config: &FitConfig, seed: u64) -> Result<Self> {
        config.validate_for(data.d())?;
        let gamma = Affiliation::random(config.k, data.t(), derive_seed(seed, 0))?;
        let r = random_orthonormal(data.d(), config.g, derive_seed(seed, 1))?;
        let lambda = lambda_step(data, &gamma)?;
        Ok(SolverState {
            data,
            config: config.clone(),
            s: Matrix::zeros(config.g, config.k),
            r,
            lambda,
            gamma,
            iteration: 0,
            sums: None,
        })
    }

    /// Start from a given affiliation and rotation.
    pub fn from_start(data: &'a DataSet, config: &FitConfig, gamma: Affiliation, r: Matrix) -> Result<Self> {
        config.validate_for(data.d())?;
        if gamma.k() != config.k || gamma.t() != data.t() {
            return Err(GoalError::invalid(format!(
                "start affiliation is K={} x T={}, expected K={} x T={}",
                gamma.k(),
                gamma.t(),
                config.k,
                data.t()
            )));
        }
        if r.shape() != (data.d(), config.g) {
            return Err(GoalError::invalid(format!(
                "start rotation is {}x{}, expected {}x{}",
                r.nrows(),
                r.ncols(),
                data.d(),
                config.g
            )));
        }
        let lambda = lambda_step(data, &gamma)?;
        Ok(SolverState {
            data,
            config: config.clone(),
            s: Matrix::zeros(config.g, config.k),
            r,
            lambda,
            gamma,
            iteration: 0,
            sums: None,
        })
    }

    /// One pass of box update → affiliation update → label update →
    /// rotation update, followed by evaluating the objective.
    pub fn step(&mut self) -> Result<StepRecord> {
        let data = self.data;
        let (sums, counts) = match self.sums.take() {
            Some(cached) => cached,
            None => cluster_sums(data.x(), &self.gamma),
        };
        let boxes = s_step_from_sums(data, &self.gamma, &self.r, sums, &counts);
        // Box images are R·S, so their inner products with X are Sᵀ (Rᵀ X).
        let cross = boxes.s.tr_mul(&tr_mul(&self.r, data.x()));
        let images = &self.r * &boxes.s;
        let image_norms: Vec<f64> = images.column_iter().map(|c| c.norm_squared()).collect();
        let gamma = assign(
            data,
            &cross,
            &image_norms,
            &self.lambda,
            self.config.eps_cl,
            self.config.lambda_floor,
        )?;
        self.lambda = lambda_step(data, &gamma)?;
        let (sums, counts) = cluster_sums(data.x(), &gamma);
        self.r = r_step_from_sums(&sums, &boxes.s)?;
        self.sums = Some((sums, counts));
        self.s = boxes.s;
        self.gamma = gamma;
        self.iteration += 1;

        let value = objective(data, &self.model_unchecked(), &self.gamma)?;
        if !value.is_finite() {
            return Err(GoalError::Numerical(format!(
                "objective became {value} at iteration {}",
                self.iteration
            )));
        }
        Ok(StepRecord {
            objective: value,
            reseeded: !boxes.reseeded.is_empty(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn affiliation(&self) -> &Affiliation {
        &self.gamma
    }

    /// Current iterate as a model (box coordinates as of the last step).
    pub fn model(&self) -> GaugeModel {
        self.model_unchecked()
    }

    fn model_unchecked(&self) -> GaugeModel {
        GaugeModel {
            r: self.r.clone(),
            s: self.s.clone(),
            lambda: self.lambda.clone(),
            eps_cl: self.config.eps_cl,
            lambda_floor: self.config.lambda_floor,
        }
    }

    /// Re-fits the box coordinates to the final rotation and affiliation
    /// and returns the model with its objective value.
    pub fn finish(mut self) -> Result<(GaugeModel, Affiliation, f64)> {
        let boxes = s_step(self.data, &self.gamma, &self.r)?;
        self.s = boxes.s;
        let model = self.model_unchecked();
        let value = objective(self.data, &model, &self.gamma)?;
        if !value.is_finite() {
            return Err(GoalError::Numerical(format!("final objective is {value}")));
        }
        Ok((model, self.gamma, value))
    }
}

struct RestartRun {
    model: GaugeModel,
    affiliation: Affiliation,
    summary: RestartSummary,
}

fn run_restart(data: &DataSet, config: &FitConfig, seed: u64) -> Result<RestartRun> {
    let mut state = SolverState::init(data, config, seed)?;
    let mut trace = Vec::new();
    let mut reseeds = Vec::new();
    let mut previous = f64::INFINITY;
    let mut converged = false;
    while state.iteration() < config.max_iter {
        let rec = state.step()?;
        trace.push(rec.objective);
        if rec.reseeded {
            reseeds.push(state.iteration());
        }
        let decrease = previous - rec.objective;
        previous = rec.objective;
        if decrease <= config.tol {
            converged = true;
            break;
        }
    }
    let iterations = state.iteration();
    let (model, affiliation, final_objective) = state.finish()?;
    Ok(RestartRun {
        model,
        affiliation,
        summary: RestartSummary {
            seed,
            objective_trace: trace,
            reseed_iterations: reseeds,
            iterations,
            converged,
            final_objective,
        },
    })
}

/// Fits the classifier from `n_restarts` random feasible starts and keeps
/// the restart with the lowest final objective (ties: lowest restart index).
pub fn fit(data: &DataSet, config: &FitConfig) -> Result<FitOutcome> {
    config.validate_for(data.d())?;
    if data.t() < config.k {
        log::warn!(
            "fewer instances (T={}) than boxes (K={}); some boxes will be re-seeded",
            data.t(),
            config.k
        );
    }
    if config.eps_e.is_some() {
        log::warn!("eps_e is not part of this objective and is ignored");
    }

    let runs: Vec<RestartRun> = (0..config.n_restarts)
        .into_par_iter()
        .map(|i| run_restart(data, config, derive_seed(config.seed, i as u64)))
        .collect::<Result<_>>()?;

    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.summary
                .final_objective
                .total_cmp(&b.1.summary.final_objective)
                .then(a.0.cmp(&b.0))
        })
        .map(|(i, _)| i)
        .expect("n_restarts >= 1");

    let summaries: Vec<RestartSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let chosen = runs.into_iter().nth(best).expect("index in range");
    let report = FitReport {
        objective_trace: chosen.summary.objective_trace.clone(),
        reseed_iterations: chosen.summary.reseed_iterations.clone(),
        iterations: chosen.summary.iterations,
        converged: chosen.summary.converged,
        restart_index_of_best: best,
        final_objective: chosen.summary.final_objective,
        restarts: summaries,
    };
    Ok(FitOutcome {
        model: chosen.model,
        affiliation: chosen.affiliation,
        report,
    })
}
