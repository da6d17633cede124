//! Property tests for the solver and its sub-steps.

use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use goal::datagen::{generate_worms, WormsSpec};
use goal::evaluation::{auc, grid_search, EvalOptions, GridSpec, SplitPlan};
use goal::io::{load_model, save_model};
use goal::model::{gamma_step, lambda_step, objective_terms, r_step, s_step, Affiliation, SolverState};
use goal::numerics::{gaussian_matrix, random_orthonormal, seeded_rng};
use goal::{fit, predict_proba, DataSet, FitConfig, GaugeModel, Matrix};

fn labelled(x: Matrix, m: usize, seed: u64) -> DataSet {
    let mut rng = seeded_rng(seed);
    let t = x.ncols();
    let mut pi = Matrix::zeros(m, t);
    for i in 0..t {
        pi[(rng.random_range(0..m), i)] = 1.0;
    }
    DataSet::new(x, pi).unwrap()
}

fn random_simplex_columns(m: usize, k: usize, rng: &mut impl Rng) -> Matrix {
    let mut lambda = Matrix::from_fn(m, k, |_, _| -(rng.random::<f64>().max(1e-300)).ln());
    for mut col in lambda.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
    lambda
}

fn random_model(d: usize, g: usize, k: usize, m: usize, eps_cl: f64, seed: u64) -> GaugeModel {
    let mut rng = seeded_rng(seed);
    let r = random_orthonormal(d, g, seed).unwrap();
    let s = gaussian_matrix(g, k, &mut rng) * 2.0;
    let lambda = random_simplex_columns(m, k, &mut rng);
    GaugeModel::new(r, s, lambda, eps_cl, 1e-12).unwrap()
}

// Gauge invariance ----------------------------------------------------------

#[test]
fn rotating_the_data_leaves_the_fitted_objective_unchanged() {
    for case in 0..10u64 {
        let mut rng = seeded_rng(100 + case);
        let d = 2 + case as usize % 5;
        let x = gaussian_matrix(d, 60, &mut rng) + Matrix::from_fn(d, 60, |_, t| if t % 2 == 0 { 2.0 } else { -2.0 });
        let data = labelled(x.clone(), 2, case);
        let q = random_orthonormal(d, d, 900 + case).unwrap();
        let rotated = DataSet::new(&q * &x, data.pi().clone()).unwrap();
        let config = FitConfig {
            k: 3,
            g: d,
            eps_cl: 0.5,
            seed: case,
            ..FitConfig::default()
        };
        let a = fit(&data, &config).unwrap().report.final_objective;
        let b = fit(&rotated, &config).unwrap().report.final_objective;
        assert!((a - b).abs() <= 1e-6, "case {case}: {a} vs {b}");
    }
}

#[test]
fn rotated_start_follows_the_rotated_trajectory() {
    for case in 0..10u64 {
        let mut rng = seeded_rng(200 + case);
        let d = 3 + case as usize % 6;
        let g = 1 + case as usize % (d - 1);
        let data = labelled(gaussian_matrix(d, 80, &mut rng) * 2.0, 3, case);
        let q = random_orthonormal(d, d, 700 + case).unwrap();
        let rotated = DataSet::new(&q * data.x(), data.pi().clone()).unwrap();
        let config = FitConfig {
            k: 4,
            g,
            eps_cl: 1.0,
            ..FitConfig::default()
        };
        let gamma = Affiliation::random(4, 80, case).unwrap();
        let r0 = random_orthonormal(d, g, case).unwrap();
        let mut a = SolverState::from_start(&data, &config, gamma.clone(), r0.clone()).unwrap();
        let mut b = SolverState::from_start(&rotated, &config, gamma, &q * &r0).unwrap();
        for it in 0..20 {
            let (la, lb) = (a.step().unwrap().objective, b.step().unwrap().objective);
            assert!((la - lb).abs() <= 1e-6, "case {case} iteration {it}: {la} vs {lb}");
        }
    }
}

// Affiliation regions ----------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// With everything but Γ fixed, the instances of one label that go to a
    /// given box form a convex set: the per-box score is affine in x.
    #[test]
    fn affiliation_regions_are_convex(
        seed in any::<u64>(),
        d in 1usize..6,
        k in 2usize..6,
        eps_cl in 0.0f64..20.0,
        w in 0.0f64..=1.0,
    ) {
        let g = 1 + (seed as usize) % d;
        let model = random_model(d, g, k, 2, eps_cl, seed);
        let mut rng = seeded_rng(seed ^ 0xABCD);
        let class = rng.random_range(0..2);
        // Pairs of points until both land in the same box.
        for _ in 0..50 {
            let x1 = gaussian_matrix(d, 1, &mut rng) * 3.0;
            let x2 = gaussian_matrix(d, 1, &mut rng) * 3.0;
            let mid = &x1 * w + &x2 * (1.0 - w);
            let mut x = Matrix::zeros(d, 3);
            x.set_column(0, &x1.column(0));
            x.set_column(1, &x2.column(0));
            x.set_column(2, &mid.column(0));
            let mut pi = Matrix::zeros(2, 3);
            pi.row_mut(class).fill(1.0);
            let data = DataSet::new(x, pi).unwrap();
            let a = gamma_step(&data, &model.box_images(), &model.lambda, eps_cl, 1e-12).unwrap();
            let a = a.assignments();
            if a[0] == a[1] {
                prop_assert_eq!(a[2], a[0]);
                break;
            }
        }
    }

    #[test]
    fn predicted_probabilities_sum_to_one(
        seed in any::<u64>(),
        d in 1usize..8,
        k in 1usize..8,
        m in 2usize..5,
        t in 1usize..40,
    ) {
        let g = 1 + (seed as usize) % d;
        let model = random_model(d, g, k, m, 1.0, seed);
        let x = gaussian_matrix(d, t, &mut seeded_rng(seed)) * 4.0;
        let proba = predict_proba(&model, &x).unwrap();
        prop_assert_eq!(proba.shape(), (m, t));
        for col in proba.column_iter() {
            prop_assert!((col.sum() - 1.0).abs() <= 1e-12);
        }
    }
}

// Sub-step optimality ---------------------------------------------------------

fn instance(case: u64) -> (DataSet, GaugeModel, Affiliation) {
    let mut rng = seeded_rng(300 + case);
    let d = 2 + case as usize % 7;
    let g = 1 + case as usize % d;
    let k = 1 + case as usize % 5;
    let m = 2 + case as usize % 2;
    let data = labelled(gaussian_matrix(d, 50, &mut rng) * 2.0, m, case);
    let model = random_model(d, g, k, m, [0.0, 0.3, 1.0, 10.0][case as usize % 4], case);
    let gamma = Affiliation::random(k, 50, case).unwrap();
    (data, model, gamma)
}

#[test]
fn box_update_beats_perturbed_boxes() {
    let delta = 1e-3;
    for case in 0..40 {
        let (data, mut model, gamma) = instance(case);
        model.s = s_step(&data, &gamma, &model.r).unwrap().s;
        let (best, _) = objective_terms(&data, &model, &gamma).unwrap();
        for k in 0..model.k() {
            if gamma.counts()[k] == 0 {
                continue;
            }
            for j in 0..model.g() {
                for sign in [-1.0, 1.0] {
                    let mut moved = model.clone();
                    moved.s[(j, k)] += sign * delta;
                    let (euclid, _) = objective_terms(&data, &moved, &gamma).unwrap();
                    assert!(euclid > best, "case {case}: box {k} coordinate {j} {sign:+}δ");
                }
            }
        }
    }
}

#[test]
fn affiliation_update_is_the_per_instance_argmin() {
    for case in 0..40 {
        let (data, model, _) = instance(case);
        let images = model.box_images();
        let gamma = gamma_step(&data, &images, &model.lambda, model.eps_cl, model.lambda_floor).unwrap();
        let weight = model.eps_cl / data.m() as f64;
        for t in 0..data.t() {
            let score = |k: usize| {
                let dist = (data.x().column(t) - images.column(k)).norm_squared();
                let ll: f64 = (0..data.m())
                    .map(|c| data.pi()[(c, t)] * model.lambda[(c, k)].max(model.lambda_floor).ln())
                    .sum();
                dist - weight * ll
            };
            let chosen = score(gamma.assignments()[t]);
            for k in 0..model.k() {
                assert!(chosen <= score(k) + 1e-12 * chosen.abs().max(1.0), "case {case} instance {t} box {k}");
            }
        }
    }
}

#[test]
fn label_update_beats_random_label_tables() {
    for case in 0..20 {
        let (data, mut model, gamma) = instance(case);
        model.lambda = lambda_step(&data, &gamma).unwrap();
        let (_, best) = objective_terms(&data, &model, &gamma).unwrap();
        let mut rng = seeded_rng(case);
        for _ in 0..1000 {
            let mut other = model.clone();
            other.lambda = random_simplex_columns(data.m(), model.k(), &mut rng);
            let (_, label) = objective_terms(&data, &other, &gamma).unwrap();
            assert!(best <= label + 1e-12, "case {case}: {best} > {label}");
        }
    }
}

#[test]
fn rotation_update_lowers_the_objective_from_any_start() {
    for case in 0..20 {
        let (data, mut model, gamma) = instance(case);
        let before = objective_terms(&data, &model, &gamma).unwrap().0;
        model.r = r_step(&data, &gamma, &model.s).unwrap();
        let after = objective_terms(&data, &model, &gamma).unwrap().0;
        assert!(after <= before + 1e-10, "case {case}: {before} -> {after}");
    }
}

// Persistence ----------------------------------------------------------------

#[test]
fn saved_model_predicts_identically() {
    let data = generate_worms(&WormsSpec {
        t: 120,
        d: 5,
        seed: 4,
        ..WormsSpec::default()
    })
    .unwrap();
    let config = FitConfig {
        k: 6,
        g: 2,
        ..FitConfig::default()
    };
    let model = fit(&data, &config).unwrap().model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&path, &model, None).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);
    let x = gaussian_matrix(5, 200, &mut seeded_rng(1)) * 5.0;
    assert_eq!(predict_proba(&loaded, &x).unwrap(), predict_proba(&model, &x).unwrap());
}

// Worms --------------------------------------------------------------------------

#[test]
fn two_dimensional_worms_are_recovered() {
    let mut aucs = Vec::new();
    for seed in 0..20 {
        let data = generate_worms(&WormsSpec {
            t: 300,
            d: 2,
            seed,
            ..WormsSpec::default()
        })
        .unwrap();
        let grid = GridSpec {
            k: vec![4, 6, 8],
            g: vec![2],
            eps_cl: vec![0.1, 1.0, 10.0],
            base: FitConfig::default(),
        };
        // ε_CL and K are tuned on a validation block; the test block only
        // scores the chosen configuration.
        let plan = SplitPlan {
            replicates: 1,
            validation_fraction: 0.2,
            seed,
            ..SplitPlan::default()
        };
        let result = grid_search(&data, &grid, &plan, EvalOptions::default()).unwrap();
        aucs.push(result.best_row().unwrap().mean_test_auc);
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    assert!(mean >= 0.95, "mean held-out AUC {mean}: {aucs:?}");
}

#[test]
fn permuting_noise_dimensions_keeps_the_radius_score() {
    let data = generate_worms(&WormsSpec {
        t: 400,
        d: 8,
        seed: 12,
        ..WormsSpec::default()
    })
    .unwrap();
    let labels = data.binary_labels(0);
    let score = |x: &Matrix| -> Vec<f64> { x.column_iter().map(|c| -(c[0] * c[0] + c[1] * c[1])).collect() };
    let base = auc(&score(data.x()), &labels).unwrap();
    let mut rng = seeded_rng(3);
    for _ in 0..10 {
        let mut rows: Vec<usize> = (2..8).collect();
        for i in (1..rows.len()).rev() {
            rows.swap(i, rng.random_range(0..=i));
        }
        let mut permuted = data.x().clone();
        for (dst, &src) in rows.iter().enumerate() {
            permuted.set_row(dst + 2, &data.x().row(src));
        }
        // Scramble the noise values too; the score must not notice.
        permuted[(2, 0)] += rng.sample::<f64, _>(StandardNormal);
        assert_eq!(auc(&score(&permuted), &labels).unwrap(), base);
    }
    assert!(base >= 0.99, "radius score AUC {base}");
}
