//! The `goal` command line. Each subcommand reads flags (optionally layered
//! over a `--config` TOML file), runs one library operation and writes its
//! outputs atomically into an output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{run_bench, BenchSpec, SweepAxis};
use crate::datagen::generate_worms;
use crate::error::{GoalError, Result};
use crate::evaluation::{
    evaluate, grid_search, make_splits, parameter_count, EvalOptions, GridResult, Metrics, SplitKind, SplitPlan,
};
use crate::io::{
    ensure_dir, load_dataset, load_model, read_features, save_model, write_features, write_json, write_labels,
    write_table, DataOverrides, Dimensions, FitMetadata, FitOverrides, GridOverrides, RunConfig, SplitOverrides,
    WormsOverrides,
};
use crate::model::{fit, labels_from_proba, predict_proba, DataSet, FitConfig, FitReport, GaugeModel};

const LONG_ABOUT: &str = "\
Small-data classifier that jointly learns a low-dimensional gauge, a discrete
segmentation of it into boxes, and per-box label probabilities.

It minimizes

  L = 1/T Σ_t ‖x_t − R s_k(t)‖²  −  ε_CL/(T·M) Σ_t Σ_m Π_m,t log Λ_m,k(t)

over R (D×G, orthonormal columns), box coordinates S (G×K), one box k(t) per
instance, and Λ (M×K, columns are probability vectors). Π holds the training
labels (M×T). Flags map to symbols as --K → K, --G → G, --eps-cl → ε_CL.

New points go to the box with the nearest image R s_k and receive its column
of Λ as class probabilities.";

#[derive(Debug, Parser)]
#[command(name = "goal", version, about = "Gauge-optimal approximate learning classifier", long_about = LONG_ABOUT)]
pub struct Cli {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic "worms" data set
    Generate(GenerateArgs),
    /// Train a model and write model.json and fit_report.json
    Fit(FitArgs),
    /// Write class probabilities and labels for new instances
    Predict(PredictArgs),
    /// Score a model against labelled data and write metrics.json
    Evaluate(EvaluateArgs),
    /// Cross-validated search over K, G and ε_CL
    #[command(long_about = "Cross-validated search over K, G and ε_CL.\n\n\
        Candidates are ranked by mean AUC on the held-out part of each split. With the default \
        --validation-fraction 0 that part is the test set, which makes the reported best score \
        optimistic; pass --validation-fraction > 0 to select on a separate validation part and \
        report test AUC on untouched data.")]
    Gridsearch(GridArgs),
    /// Time solver iterations over a geometric sweep of D or T
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Output directory (created if missing; default: [output] from the config, else .)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl OutDir {
    fn resolve(&self, file: &RunConfig) -> Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .or_else(|| file.output.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        ensure_dir(&dir)?;
        Ok(dir)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub worms: WormsOverrides,
    /// Also write a stratified train/test split that holds out this fraction
    #[arg(long)]
    pub holdout: Option<f64>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataOverrides,
    #[command(flatten)]
    pub fit: FitOverrides,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file written by `fit` or `gridsearch`
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataOverrides,
    /// Binary models: predict class 1 when its probability exceeds this
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataOverrides,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Row of the label table scored as the positive class
    #[arg(long, default_value_t = 0)]
    pub positive_row: usize,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataOverrides,
    /// Settings shared by every candidate
    #[command(flatten)]
    pub fit: FitOverrides,
    #[command(flatten)]
    pub grid: GridOverrides,
    #[command(flatten)]
    pub split: SplitOverrides,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "D")]
    pub sweep: SweepAxis,
    #[arg(long, default_value_t = 100)]
    pub from: usize,
    #[arg(long, default_value_t = 6400)]
    pub to: usize,
    /// Size of the axis that is held fixed
    #[arg(long, default_value_t = 500)]
    pub fixed: usize,
    #[arg(long = "K", default_value_t = 4)]
    pub k: usize,
    #[arg(long = "G", default_value_t = 2)]
    pub g: usize,
    #[arg(long, default_value_t = 1.0)]
    pub eps_cl: f64,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutDir,
}

/// Sizes the rayon pool from `GOAL_THREADS` (default: all cores).
pub fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("GOAL_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| GoalError::config(format!("GOAL_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| GoalError::config(format!("cannot size thread pool: {e}")))
}

pub fn run(cli: &Cli) -> Result<()> {
    let file = RunConfig::load_optional(cli.config.as_deref())?;
    match &cli.command {
        Command::Generate(a) => generate_cmd(a, &file),
        Command::Fit(a) => fit_cmd(a, &file),
        Command::Predict(a) => predict_cmd(a, &file),
        Command::Evaluate(a) => evaluate_cmd(a, &file),
        Command::Gridsearch(a) => grid_cmd(a, &file),
        Command::Bench(a) => bench_cmd(a, &file),
    }
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

fn load_data(data: &DataOverrides) -> Result<DataSet> {
    load_dataset(data.features()?, data.labels()?, data.orientation())
}

fn generate_cmd(a: &GenerateArgs, file: &RunConfig) -> Result<()> {
    let spec = file.worms.layer(&a.worms).resolve();
    let out = a.out.resolve(file)?;
    let data = generate_worms(&spec)?;
    let write_pair = |prefix: &str, d: &DataSet| -> Result<()> {
        let (f, l) = (out.join(format!("{prefix}features.csv")), out.join(format!("{prefix}labels.csv")));
        write_features(&f, d.x())?;
        write_labels(&l, d.pi())?;
        wrote(&f);
        wrote(&l);
        Ok(())
    };
    write_pair("", &data)?;
    if let Some(h) = a.holdout {
        if !(h > 0.0 && h < 1.0) {
            return Err(GoalError::config(format!("--holdout must lie in (0, 1), got {h}")));
        }
        let plan = SplitPlan {
            kind: SplitKind::RandomHoldout,
            train_fraction: 1.0 - h,
            validation_fraction: 0.0,
            replicates: 1,
            stratified: true,
            seed: spec.seed,
            ..SplitPlan::default()
        };
        let split = make_splits(data.t(), &plan, Some(&data.class_indices()))?.remove(0);
        write_pair("train_", &data.subset(&split.train)?)?;
        write_pair("test_", &data.subset(&split.test)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FitReportFile<'a> {
    dimensions: Dimensions,
    config: &'a FitConfig,
    parameter_count: usize,
    report: &'a FitReport,
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
}

fn dimensions(model: &GaugeModel) -> Dimensions {
    Dimensions {
        d: model.d(),
        g: model.g(),
        k: model.k(),
        m: model.m(),
    }
}

fn fit_cmd(a: &FitArgs, file: &RunConfig) -> Result<()> {
    let data_args = file.data.layer(&a.data);
    let config = file.fit.layer(&a.fit).resolve();
    let out = a.out.resolve(file)?;
    let data = load_data(&data_args)?;

    let start = Instant::now();
    let outcome = fit(&data, &config)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let model_path = out.join("model.json");
    save_model(
        &model_path,
        &outcome.model,
        Some(FitMetadata {
            seed: config.seed,
            iterations: outcome.report.iterations,
            final_objective: outcome.report.final_objective,
        }),
    )?;
    wrote(&model_path);
    let report_path = out.join("fit_report.json");
    write_json(
        &report_path,
        &FitReportFile {
            dimensions: dimensions(&outcome.model),
            config: &config,
            parameter_count: parameter_count(&config, data.d(), data.m()),
            report: &outcome.report,
        },
    )?;
    wrote(&report_path);
    let timing_path = out.join("timing.json");
    write_json(&timing_path, &Timing { wall_seconds })?;
    wrote(&timing_path);
    println!(
        "final objective {} after {} iterations (restart {})",
        outcome.report.final_objective, outcome.report.iterations, outcome.report.restart_index_of_best
    );
    Ok(())
}

fn predict_cmd(a: &PredictArgs, file: &RunConfig) -> Result<()> {
    let data_args = file.data.layer(&a.data);
    let out = a.out.resolve(file)?;
    let model = load_model(&a.model)?;
    let x = read_features(data_args.features()?, data_args.orientation())?;
    let proba = predict_proba(&model, &x)?;
    let labels = labels_from_proba(&proba, a.threshold, 0)?;

    let mut header: Vec<String> = (0..proba.nrows()).map(|m| format!("p{m}")).collect();
    header.push("label".into());
    let rows: Vec<Vec<String>> = proba
        .column_iter()
        .zip(&labels)
        .map(|(col, label)| {
            let mut row: Vec<String> = col.iter().map(|v| v.to_string()).collect();
            row.push(label.to_string());
            row
        })
        .collect();
    let path = out.join("predictions.csv");
    write_table(&path, Some(&header), &rows)?;
    wrote(&path);
    Ok(())
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    threshold: f64,
    positive_row: usize,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

fn evaluate_cmd(a: &EvaluateArgs, file: &RunConfig) -> Result<()> {
    let data_args = file.data.layer(&a.data);
    let out = a.out.resolve(file)?;
    let model = load_model(&a.model)?;
    let data = load_data(&data_args)?;
    let proba = predict_proba(&model, data.x())?;
    let metrics = evaluate(&proba, &data, a.positive_row, a.threshold)?;
    let path = out.join("metrics.json");
    write_json(
        &path,
        &MetricsFile {
            threshold: a.threshold,
            positive_row: a.positive_row,
            metrics: &metrics,
        },
    )?;
    wrote(&path);
    println!("AUC {} accuracy {} on {} instances", metrics.auc, metrics.accuracy, metrics.n_test);
    Ok(())
}

/// The grid result with wall-clock fields removed, so that the report is
/// reproducible byte for byte.
fn without_timing(result: &GridResult) -> Result<serde_json::Value> {
    let mut value = serde_json::to_value(result).map_err(|e| GoalError::invalid(e.to_string()))?;
    if let Some(rows) = value.get_mut("rows").and_then(|r| r.as_array_mut()) {
        for row in rows {
            if let Some(obj) = row.as_object_mut() {
                obj.remove("mean_fit_seconds");
            }
            if let Some(splits) = row.get_mut("splits").and_then(|s| s.as_array_mut()) {
                for s in splits.iter_mut().filter_map(|s| s.as_object_mut()) {
                    s.remove("fit_seconds");
                }
            }
        }
    }
    Ok(value)
}

fn grid_table(result: &GridResult) -> (Vec<String>, Vec<Vec<String>>) {
    let header = [
        "K",
        "G",
        "eps_cl",
        "parameter_count",
        "mean_auc",
        "mean_test_auc",
        "test_auc_ci",
        "mean_accuracy",
        "mean_iterations",
        "failed",
    ]
    .map(String::from)
    .to_vec();
    let rows = result
        .rows
        .iter()
        .map(|r| {
            vec![
                r.config.k.to_string(),
                r.config.g.to_string(),
                r.config.eps_cl.to_string(),
                r.parameter_count.to_string(),
                r.mean_auc.to_string(),
                r.mean_test_auc.to_string(),
                r.test_auc_ci.to_string(),
                r.mean_accuracy.to_string(),
                r.mean_iterations.to_string(),
                r.failed.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            ]
        })
        .collect();
    (header, rows)
}

fn grid_cmd(a: &GridArgs, file: &RunConfig) -> Result<()> {
    let data_args = file.data.layer(&a.data);
    let base = file.fit.layer(&a.fit).resolve();
    let grid = file.grid.layer(&a.grid).resolve(base);
    let plan = file.split.layer(&a.split).resolve();
    let out = a.out.resolve(file)?;
    let data = load_data(&data_args)?;

    let opts = EvalOptions {
        threshold: a.threshold,
        ..EvalOptions::default()
    };
    let start = Instant::now();
    let result = grid_search(&data, &grid, &plan, opts)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let (header, rows) = grid_table(&result);
    let table_path = out.join("grid.csv");
    write_table(&table_path, Some(&header), &rows)?;
    wrote(&table_path);
    let report_path = out.join("grid_report.json");
    write_json(&report_path, &without_timing(&result)?)?;
    wrote(&report_path);
    let timing_path = out.join("timing.json");
    let per_row: Vec<f64> = result.rows.iter().map(|r| r.mean_fit_seconds).collect();
    write_json(
        &timing_path,
        &serde_json::json!({ "wall_seconds": wall_seconds, "mean_fit_seconds": per_row }),
    )?;
    wrote(&timing_path);

    let best = result
        .best_row()
        .ok_or_else(|| GoalError::Numerical("every grid candidate failed".into()))?;
    println!(
        "best K={} G={} eps_cl={}: mean AUC {} (test {} ± {}) over {} splits",
        best.config.k, best.config.g, best.config.eps_cl, best.mean_auc, best.mean_test_auc, best.test_auc_ci, result.n_splits
    );
    // The reported model is refit on all instances with the selected settings.
    let refit = fit(&data, &best.config)?;
    let model_path = out.join("best_model.json");
    save_model(
        &model_path,
        &refit.model,
        Some(FitMetadata {
            seed: best.config.seed,
            iterations: refit.report.iterations,
            final_objective: refit.report.final_objective,
        }),
    )?;
    wrote(&model_path);
    Ok(())
}

fn bench_cmd(a: &BenchArgs, file: &RunConfig) -> Result<()> {
    let out = a.out.resolve(file)?;
    let spec = BenchSpec {
        axis: a.sweep,
        from: a.from,
        to: a.to,
        fixed: a.fixed,
        k: a.k,
        g: a.g,
        eps_cl: a.eps_cl,
        iterations: a.iterations,
        repeats: a.repeats,
        seed: a.seed,
    };
    let result = run_bench(&spec)?;
    let header = ["size", "D", "T", "seconds_per_iteration"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .map(|p| {
            vec![
                p.size.to_string(),
                p.d.to_string(),
                p.t.to_string(),
                p.seconds_per_iteration.to_string(),
            ]
        })
        .collect();
    let csv_path = out.join("bench.csv");
    write_table(&csv_path, Some(&header), &rows)?;
    wrote(&csv_path);
    let json_path = out.join("bench.json");
    write_json(&json_path, &result)?;
    wrote(&json_path);
    println!("log-log slope of time per iteration vs {:?}: {}", spec.axis, result.slope);
    Ok(())
}
