//! Per-iteration cost measurements over geometric size sweeps.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::{generate_worms, WormsSpec};
use crate::error::{GoalError, Result};
use crate::model::{FitConfig, SolverState};
use crate::numerics::log_log_slope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum SweepAxis {
    /// Vary the feature count at fixed T.
    #[value(name = "D")]
    #[serde(rename = "D")]
    D,
    /// Vary the instance count at fixed D.
    #[value(name = "T")]
    #[serde(rename = "T")]
    T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub axis: SweepAxis,
    pub from: usize,
    pub to: usize,
    /// Size of the axis that is not swept.
    pub fixed: usize,
    pub k: usize,
    pub g: usize,
    pub eps_cl: f64,
    /// Timed iterations per repeat; the solver is never stopped early.
    pub iterations: usize,
    /// Repeats per size; the median is reported.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            axis: SweepAxis::D,
            from: 100,
            to: 6400,
            fixed: 500,
            k: 4,
            g: 2,
            eps_cl: 1.0,
            iterations: 10,
            repeats: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub size: usize,
    pub d: usize,
    pub t: usize,
    /// Median over repeats of wall time per iteration.
    pub seconds_per_iteration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub spec: BenchSpec,
    pub points: Vec<BenchPoint>,
    /// Least-squares slope of log time against log size.
    pub slope: f64,
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.from < 2 || self.to < self.from {
            return Err(GoalError::config(format!(
                "bench sizes need 2 <= from <= to (got {}..{})",
                self.from, self.to
            )));
        }
        if self.fixed < 2 {
            return Err(GoalError::config("bench fixed size must be at least 2"));
        }
        if self.iterations == 0 || self.repeats == 0 {
            return Err(GoalError::config("bench needs at least one iteration and one repeat"));
        }
        let smallest_d = match self.axis {
            SweepAxis::D => self.from,
            SweepAxis::T => self.fixed,
        };
        self.fit_config().validate_for(smallest_d)
    }

    /// `from, 2·from, 4·from, …` up to `to`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::successors(Some(self.from), |&s| s.checked_mul(2))
            .take_while(|&s| s <= self.to)
            .collect()
    }

    fn fit_config(&self) -> FitConfig {
        FitConfig {
            k: self.k,
            g: self.g,
            eps_cl: self.eps_cl,
            n_restarts: 1,
            seed: self.seed,
            ..FitConfig::default()
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median seconds per iteration on a worms data set of the given size.
pub fn time_iterations(d: usize, t: usize, spec: &BenchSpec) -> Result<f64> {
    let data = generate_worms(&WormsSpec {
        t,
        d,
        seed: spec.seed,
        ..WormsSpec::default()
    })?;
    let config = spec.fit_config();
    // One untimed pass warms caches and the allocator.
    let mut warm = SolverState::init(&data, &config, spec.seed)?;
    warm.step()?;

    let mut samples = Vec::with_capacity(spec.repeats);
    for r in 0..spec.repeats {
        let mut state = SolverState::init(&data, &config, spec.seed.wrapping_add(r as u64))?;
        let start = Instant::now();
        for _ in 0..spec.iterations {
            state.step()?;
        }
        samples.push(start.elapsed().as_secs_f64() / spec.iterations as f64);
    }
    Ok(median(&mut samples))
}

/// Runs the sweep one size at a time so that measurements do not compete
/// for cores.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchResult> {
    spec.validate()?;
    let mut points = Vec::new();
    for size in spec.sizes() {
        let (d, t) = match spec.axis {
            SweepAxis::D => (size, spec.fixed),
            SweepAxis::T => (spec.fixed, size),
        };
        let seconds = time_iterations(d, t, spec)?;
        log::info!("bench {:?}={size}: {seconds:.3e} s/iteration", spec.axis);
        points.push(BenchPoint {
            size,
            d,
            t,
            seconds_per_iteration: seconds,
        });
    }
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.size as f64, p.seconds_per_iteration))
        .collect();
    let slope = log_log_slope(&pairs)
        .ok_or_else(|| GoalError::config("bench needs at least two distinct sizes to fit a slope"))?;
    Ok(BenchResult {
        spec: spec.clone(),
        points,
        slope,
    })
}
