//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line per
//! criterion (run with `--nocapture` to see them). Tests take a shared lock
//! so that the timing-sensitive ones never share the CPU with each other.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;

use goal::bench::{run_bench, BenchSpec, SweepAxis};
use goal::datagen::{generate_worms, WormsSpec};
use goal::evaluation::{accuracy, auc, grid_search, log_grid, EvalOptions, GridSpec, SplitPlan};
use goal::model::{r_step, rotation_objective, s_step, Affiliation, SolverState};
use goal::numerics::{derive_seed, gaussian_matrix, random_orthonormal, seeded_rng};
use goal::{fit, DataSet, FitConfig, Matrix};

static LOCK: Mutex<()> = Mutex::new(());

fn lock() -> std::sync::MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(name: &str, pass: bool, detail: &str) -> bool {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

/// Labelled Gaussian blobs: `clusters` centres, labels tied to the centre
/// with some flips, `m` classes.
fn blob_data(d: usize, t: usize, clusters: usize, m: usize, seed: u64) -> DataSet {
    let mut rng = seeded_rng(seed);
    let centres = gaussian_matrix(d, clusters, &mut rng) * 3.0;
    let mut x = gaussian_matrix(d, t, &mut rng);
    let mut pi = Matrix::zeros(m, t);
    for i in 0..t {
        let c = rng.random_range(0..clusters);
        x.column_mut(i).axpy(1.0, &centres.column(c), 1.0);
        let class = if rng.random_bool(0.8) { c % m } else { rng.random_range(0..m) };
        pi[(class, i)] = 1.0;
    }
    DataSet::new(x, pi).unwrap()
}

// ---------------------------------------------------------------------------

#[test]
fn monotone_convergence() {
    let _g = lock();
    let start = Instant::now();
    let mut rng = seeded_rng(2024);
    let eps_values = [0.0, 0.1, 1.0, 10.0];
    let (mut checked, mut violations, mut reseeding) = (0usize, Vec::new(), 0usize);
    for inst in 0..100 {
        let d = rng.random_range(2..=20);
        let t = rng.random_range(10..=200);
        let k = rng.random_range(1..=5);
        let g = rng.random_range(1..=d.min(4));
        let eps_cl = eps_values[inst % 4];
        let m = if inst % 5 == 0 { 3 } else { 2 };
        let data = blob_data(d, t, rng.random_range(1..=4), m, 1000 + inst as u64);
        let config = FitConfig {
            k,
            g,
            eps_cl,
            n_restarts: 3,
            seed: inst as u64,
            ..FitConfig::default()
        };
        let out = fit(&data, &config).unwrap();
        for run in &out.report.restarts {
            // reseed_iterations are 1-based: iteration I produced trace[I - 1].
            for i in 1..run.objective_trace.len() {
                if run.reseed_iterations.contains(&(i + 1)) {
                    reseeding += 1;
                    continue;
                }
                checked += 1;
                let (prev, next) = (run.objective_trace[i - 1], run.objective_trace[i]);
                if next > prev + 1e-10 {
                    violations.push(format!("instance {inst}: {prev} -> {next}"));
                }
            }
            if run.final_objective > run.objective_trace.last().unwrap() + 1e-10 {
                violations.push(format!("instance {inst}: final S refit increased the objective"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = violations.is_empty() && secs < 60.0;
    report(
        "monotone convergence (100 instances)",
        pass,
        &format!(
            "{checked} iteration pairs checked, {reseeding} re-seeding iterations skipped, {} violations, {secs:.1}s (limit 60s) {:?}",
            violations.len(),
            violations.iter().take(3).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

#[test]
fn r_step_optimality() {
    let _g = lock();
    let start = Instant::now();
    let mut rng = seeded_rng(77);
    let mut failures = Vec::new();
    let mut degenerate = Vec::new();
    let mut min_margin = f64::INFINITY;
    for inst in 0..20u64 {
        let d = rng.random_range(2..=8);
        let g = rng.random_range(1..=d);
        // Every fourth instance has fewer boxes than gauge dimensions, so
        // X Γᵀ Sᵀ is rank deficient.
        let k = if inst % 4 == 3 { rng.random_range(1..=g) } else { rng.random_range(g..=g + 3) };
        let t = rng.random_range(k.max(5)..=60);
        let data = blob_data(d, t, 3, 2, 500 + inst);
        let gamma = Affiliation::random(k, t, inst).unwrap();
        let s = s_step(&data, &gamma, &random_orthonormal(d, g, 900 + inst).unwrap())
            .unwrap()
            .s;
        let r = r_step(&data, &gamma, &s).unwrap();
        let f_star = rotation_objective(&data, &gamma, &r, &s);
        let best_random = (0..1000)
            .map(|i| {
                let q = random_orthonormal(d, g, derive_seed(inst, i)).unwrap();
                rotation_objective(&data, &gamma, &q, &s)
            })
            .fold(f64::INFINITY, f64::min);
        let margin = best_random - f_star;
        min_margin = min_margin.min(margin);
        // Non-strict comparison with a rounding allowance relative to the scale.
        if margin < -1e-9 * f_star.abs().max(1.0) {
            failures.push(format!("instance {inst}: f*={f_star} best random={best_random}"));
        }
        let target = {
            let mut sums = Matrix::zeros(d, k);
            for (i, &b) in gamma.assignments().iter().enumerate() {
                sums.column_mut(b).axpy(1.0, &data.x().column(i), 1.0);
            }
            sums * s.transpose()
        };
        let rank = target.rank(1e-10 * target.norm().max(1.0));
        if rank < g {
            degenerate.push(format!("instance {inst} (rank {rank} < G={g}, margin {margin:.3e})"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    for line in &degenerate {
        println!("  degenerate rank case: {line}");
    }
    let pass = failures.is_empty() && secs < 60.0;
    report(
        "R-step optimality vs 1000 random rotations (20 instances)",
        pass,
        &format!(
            "smallest margin best_random - f* = {min_margin:.3e}, {} degenerate-rank instances, {secs:.1}s {:?}",
            degenerate.len(),
            failures
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

/// Optimal objective for a fixed 2-partition, from first principles: box
/// centres are the projections of cluster means onto the best G-dimensional
/// subspace, which is spanned by the top eigenvectors of Σ_k n_k m_k m_kᵀ;
/// Λ is the per-box class frequency.
fn partition_objective(data: &DataSet, assign: &[usize], g: usize, eps_cl: f64) -> f64 {
    let (d, t, m) = (data.d(), data.t(), data.m());
    let x = data.x();
    let mut means = vec![vec![0.0; d]; 2];
    let mut counts = [0usize; 2];
    let mut class_mass = vec![vec![0.0; m]; 2];
    for i in 0..t {
        let k = assign[i];
        counts[k] += 1;
        for r in 0..d {
            means[k][r] += x[(r, i)];
        }
        for c in 0..m {
            class_mass[k][c] += data.pi()[(c, i)];
        }
    }
    for k in 0..2 {
        for v in &mut means[k] {
            *v /= counts[k] as f64;
        }
    }
    let mut within = 0.0;
    for i in 0..t {
        let k = assign[i];
        for r in 0..d {
            within += (x[(r, i)] - means[k][r]).powi(2);
        }
    }
    // Σ n_k ‖m_k‖² minus the part captured by the best G-dimensional subspace.
    let mut scatter = Matrix::zeros(d, d);
    let mut mean_energy = 0.0;
    for k in 0..2 {
        for a in 0..d {
            mean_energy += counts[k] as f64 * means[k][a] * means[k][a];
            for b in 0..d {
                scatter[(a, b)] += counts[k] as f64 * means[k][a] * means[k][b];
            }
        }
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(scatter).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let captured: f64 = eig.iter().take(g).sum();
    let euclid = within + mean_energy - captured;

    let mut label = 0.0;
    for i in 0..t {
        let k = assign[i];
        let total: f64 = class_mass[k].iter().sum();
        for c in 0..m {
            let p = data.pi()[(c, i)];
            if p > 0.0 {
                label -= p * (class_mass[k][c] / total).max(1e-12).ln();
            }
        }
    }
    euclid / t as f64 + eps_cl * label / (t * m) as f64
}

fn brute_force(data: &DataSet, g: usize, eps_cl: f64) -> f64 {
    let t = data.t();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << t) - 1 {
        let assign: Vec<usize> = (0..t).map(|i| ((mask >> i) & 1) as usize).collect();
        best = best.min(partition_objective(data, &assign, g, eps_cl));
    }
    best
}

#[test]
fn substep_exactness_vs_brute_force() {
    let _g = lock();
    let start = Instant::now();
    let mut rng = seeded_rng(4242);
    let eps_values = [0.0, 0.5, 1.0, 5.0];
    let mut worst_gap: f64 = 0.0;
    let mut failures = Vec::new();
    // The alternating scheme can stop in a local minimum; with the default
    // 10 restarts one of these instances does. Restarts are cheap at T <= 12.
    let restarts = 100;
    let (mut at_default, n_instances) = (0usize, 40);
    for inst in 0..n_instances {
        let t = rng.random_range(6..=12);
        let d = rng.random_range(1..=3);
        // Two thirds with G = D, the rest with a proper gauge G < D.
        let g = if inst % 3 == 2 && d > 1 { rng.random_range(1..d) } else { d };
        let eps_cl = eps_values[inst % 4];
        let data = blob_data(d, t, 2, 2, 7000 + inst as u64);
        let config = FitConfig {
            k: 2,
            g,
            eps_cl,
            seed: inst as u64,
            ..FitConfig::default()
        };
        let exhaustive = brute_force(&data, g, eps_cl);
        if (fit(&data, &config).unwrap().report.final_objective - exhaustive).abs() <= 1e-6 {
            at_default += 1;
        }
        let config = FitConfig {
            n_restarts: restarts,
            ..config
        };
        let fitted = fit(&data, &config).unwrap().report.final_objective;
        let gap = fitted - exhaustive;
        worst_gap = worst_gap.max(gap.abs());
        if gap.abs() > 1e-6 {
            failures.push(format!(
                "instance {inst} (T={t} D={d} G={g} eps={eps_cl}): fit {fitted} vs exhaustive {exhaustive}"
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 300.0;
    report(
        "fit matches exhaustive search over 2-partitions (T <= 12, K = 2)",
        pass,
        &format!(
            "{n_instances} instances, {restarts} restarts, worst |gap| {worst_gap:.3e} (tol 1e-6), {secs:.1}s; \
             {at_default}/{n_instances} also reached with the default {} restarts {:?}",
            FitConfig::default().n_restarts,
            failures
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn worms_grid_auc(d: usize) -> (f64, String, f64) {
    let data = generate_worms(&WormsSpec {
        t: 300,
        d,
        seed: 0,
        ..WormsSpec::default()
    })
    .unwrap();
    let grid = GridSpec {
        k: (2..=10).collect(),
        g: vec![2, 3],
        eps_cl: log_grid(-2, 2, 1),
        base: FitConfig::default(),
    };
    let plan = SplitPlan {
        replicates: 20,
        ..SplitPlan::default()
    };
    let start = Instant::now();
    let result = grid_search(&data, &grid, &plan, EvalOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let best = result.best_row().unwrap();
    let desc = format!(
        "best K={} G={} eps_cl={} of {} candidates x {} splits",
        best.config.k,
        best.config.g,
        best.config.eps_cl,
        result.rows.len(),
        result.n_splits
    );
    (best.mean_test_auc, desc, secs)
}

#[test]
fn worms_big_data_regime() {
    let _g = lock();
    let (auc, desc, secs) = worms_grid_auc(10);
    let pass = auc >= 0.90 && secs < 900.0;
    report(
        "worms T=300 D=10: mean test AUC >= 0.90",
        pass,
        &format!("mean test AUC {auc:.4}, {desc}, {secs:.1}s"),
    );
    assert!(pass);
}

#[test]
fn worms_small_data_regime() {
    let _g = lock();
    let (auc, desc, secs) = worms_grid_auc(1000);
    let pass = auc >= 0.60 && secs < 900.0;
    report(
        "worms T=300 D=1000: mean test AUC >= 0.60",
        pass,
        &format!("mean test AUC {auc:.4}, {desc}, {secs:.1}s (limit 900s)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

#[test]
fn linear_iteration_cost() {
    let _g = lock();
    let start = Instant::now();
    let mut all_pass = true;
    for axis in [SweepAxis::D, SweepAxis::T] {
        let spec = BenchSpec {
            axis,
            from: 100,
            to: 6400,
            fixed: 500,
            k: 4,
            g: 2,
            iterations: 20,
            repeats: 7,
            ..BenchSpec::default()
        };
        let result = run_bench(&spec).unwrap();
        let ratios: Vec<String> = result
            .points
            .windows(2)
            .map(|w| format!("{:.2}", w[1].seconds_per_iteration / w[0].seconds_per_iteration))
            .collect();
        let pass = (0.8..=1.3).contains(&result.slope);
        all_pass &= report(
            &format!("per-iteration cost vs {axis:?} (100..6400, fixed 500)"),
            pass,
            &format!("log-log slope {:.3} (range 0.8..1.3), doubling ratios {:?}", result.slope, ratios),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    all_pass &= report("scaling sweeps runtime", secs < 600.0, &format!("{secs:.1}s (limit 600s)"));
    assert!(all_pass);
}

// ---------------------------------------------------------------------------

fn feasibility_errors(data: &DataSet, model: &goal::GaugeModel, gamma: &Affiliation) -> Vec<String> {
    let mut errs = Vec::new();
    let orth = (model.r.transpose() * &model.r - Matrix::identity(model.g(), model.g())).norm();
    if orth > 1e-8 {
        errs.push(format!("|RᵀR - I| = {orth:e}"));
    }
    for (k, col) in model.lambda.column_iter().enumerate() {
        if (col.sum() - 1.0).abs() > 1e-12 || col.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            errs.push(format!("Λ column {k} sums to {}", col.sum()));
        }
    }
    for (i, col) in data.pi().column_iter().enumerate() {
        if (col.sum() - 1.0).abs() > 1e-12 {
            errs.push(format!("Π column {i} sums to {}", col.sum()));
        }
    }
    let g = gamma.to_matrix();
    for (i, col) in g.column_iter().enumerate() {
        let ones = col.iter().filter(|&&v| v == 1.0).count();
        let zeros = col.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || zeros != col.len() - 1 {
            errs.push(format!("Γ column {i} is not one-hot"));
        }
    }
    errs
}

#[test]
fn feasibility_suite() {
    let _g = lock();
    let mut rng = seeded_rng(31);
    let (mut fits, mut iterations, mut errors) = (0usize, 0usize, Vec::new());
    for inst in 0..60u64 {
        let d = rng.random_range(1..=12);
        let g = rng.random_range(1..=d);
        let k = rng.random_range(1..=8);
        let t = rng.random_range(3..=80);
        let m = rng.random_range(2..=4);
        let mut data = blob_data(d, t, 3, m, 300 + inst);
        if inst % 3 == 0 {
            // Soft labels: random points on the simplex.
            let mut pi = Matrix::zeros(m, t);
            for i in 0..t {
                let w: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-3).collect();
                let s: f64 = w.iter().sum();
                for c in 0..m {
                    pi[(c, i)] = w[c] / s;
                }
            }
            data = DataSet::new(data.x().clone(), pi).unwrap();
        }
        let eps_cl = [0.0, 0.3, 1.0, 30.0][inst as usize % 4];
        let config = FitConfig {
            k,
            g,
            eps_cl,
            n_restarts: 2,
            seed: inst,
            ..FitConfig::default()
        };
        // Every iterate of one restart ...
        let mut state = SolverState::init(&data, &config, inst).unwrap();
        for _ in 0..30 {
            state.step().unwrap();
            iterations += 1;
            for e in feasibility_errors(&data, &state.model(), state.affiliation()) {
                errors.push(format!("instance {inst} iteration {}: {e}", state.iteration()));
            }
        }
        // ... and the output of every full fit.
        let out = fit(&data, &config).unwrap();
        fits += 1;
        for e in feasibility_errors(&data, &out.model, &out.affiliation) {
            errors.push(format!("instance {inst} fit: {e}"));
        }
    }
    let pass = errors.is_empty();
    report(
        "feasibility after every iteration and fit",
        pass,
        &format!("{fits} fits, {iterations} iterates checked, {} violations {:?}", errors.len(), errors.iter().take(3).collect::<Vec<_>>()),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn auc_by_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn metric_oracles() {
    let _g = lock();
    let mut rng = seeded_rng(555);
    let (mut worst_auc, mut worst_acc): (f64, f64) = (0.0, 0.0);
    for case in 0..1000 {
        let n = rng.random_range(2..=50);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 1;
        labels[1] = 0;
        // Coarse scores in half the cases so that ties are common.
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if case % 2 == 0 {
                    rng.random_range(0..5) as f64 / 4.0
                } else {
                    rng.sample(StandardNormal)
                }
            })
            .collect();
        worst_auc = worst_auc.max((auc(&scores, &labels).unwrap() - auc_by_pairs(&scores, &labels)).abs());

        let predicted: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let direct = predicted.iter().zip(&labels).filter(|(p, l)| p == l).count() as f64 / n as f64;
        worst_acc = worst_acc.max((accuracy(&predicted, &labels).unwrap() - direct).abs());
    }
    let pass = worst_auc <= 1e-12 && worst_acc <= 1e-12;
    report(
        "AUC and accuracy vs pair-counting / direct-count oracles (1000 cases)",
        pass,
        &format!("max |AUC diff| {worst_auc:.1e}, max |accuracy diff| {worst_acc:.1e}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------

fn goal_cli(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_goal"))
        .current_dir(dir)
        .env("GOAL_THREADS", "2")
        .args(args)
        .output()
        .expect("spawn goal");
    assert!(
        out.status.success(),
        "goal {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn pipeline(dir: &Path) -> Vec<PathBuf> {
    goal_cli(dir, &["generate", "--T", "200", "--D", "6", "--seed", "3", "--holdout", "0.25", "--out", "."]);
    let train = ["--features", "train_features.csv", "--labels", "train_labels.csv"];
    let test = ["--features", "test_features.csv", "--labels", "test_labels.csv"];
    let mut fit_args = vec!["fit"];
    fit_args.extend(train);
    fit_args.extend(["--K", "6", "--G", "2", "--eps-cl", "1", "--seed", "5", "--out", "fit"]);
    goal_cli(dir, &fit_args);
    let mut pred = vec!["predict", "--model", "fit/model.json", "--out", "pred"];
    pred.extend(&test[..2]);
    goal_cli(dir, &pred);
    let mut eval = vec!["evaluate", "--model", "fit/model.json", "--out", "eval"];
    eval.extend(test);
    goal_cli(dir, &eval);
    let mut grid = vec!["gridsearch", "--grid-K", "2,4", "--grid-G", "2", "--grid-eps-cl", "0.1,10"];
    grid.extend(train);
    grid.extend(["--replicates", "3", "--restarts", "3", "--out", "grid"]);
    goal_cli(dir, &grid);

    let mut files: Vec<PathBuf> = walk(dir)
        .into_iter()
        .filter(|p| p.file_name().is_some_and(|n| n != "timing.json"))
        .map(|p| p.strip_prefix(dir).unwrap().to_path_buf())
        .collect();
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

#[test]
fn cli_runs_are_byte_identical() {
    let _g = lock();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_a = pipeline(a.path());
    let files_b = pipeline(b.path());
    let mut differing = Vec::new();
    for f in &files_a {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)));
        if y.map_or(true, |y| y != x) {
            differing.push(f.display().to_string());
        }
    }
    let pass = files_a == files_b && differing.is_empty() && files_a.len() >= 12;
    report(
        "two identical CLI pipelines produce byte-identical outputs",
        pass,
        &format!("{} output files compared (timing.json excluded), differing: {:?}", files_a.len(), differing),
    );
    assert!(pass);
}
