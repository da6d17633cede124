// Turn a multivariate series into lagged features and thresholded
// event labels, then evaluate on a temporal split.

use goal::datagen::{lag_embed, threshold_labels, LagSpec};
use goal::evaluation::{evaluate, make_splits, SplitKind, SplitPlan};
use goal::numerics::{gaussian_matrix, seeded_rng};
use goal::{fit, predict_proba, DataSet, FitConfig, Matrix};

pub fn run_example() -> goal::Result<f64> {
    // Two noisy proxies; the index follows the first proxy three steps later.
    let n = 400;
    let mut rng = seeded_rng(5);
    let noise = gaussian_matrix(2, n, &mut rng);
    let mut series = Matrix::zeros(2, n);
    for t in 0..n {
        series[(0, t)] = (t as f64 * 0.15).sin() + 0.3 * noise[(0, t)];
        series[(1, t)] = noise[(1, t)];
    }
    let index: Vec<f64> = (0..n)
        .map(|t| if t >= 3 { series[(0, t - 3)] } else { 0.0 })
        .collect();

    let spec = LagSpec {
        lags: vec![0, 1, 2, 3],
        lead: 3,
        threshold: 0.4,
    };
    let x = lag_embed(&series, &spec)?;
    let pi = threshold_labels(&index, &spec)?;
    let data = DataSet::new(x, pi)?;
    println!("{} lagged samples with {} features", data.t(), data.d());

    let plan = SplitPlan {
        kind: SplitKind::Temporal,
        train_fraction: 0.75,
        stratified: false,
        ..SplitPlan::default()
    };
    let split = make_splits(data.t(), &plan, None)?.remove(0);
    let (train, test) = (data.subset(&split.train)?, data.subset(&split.test)?);
    let model = fit(
        &train,
        &FitConfig {
            k: 6,
            g: 2,
            eps_cl: 1.0,
            ..FitConfig::default()
        },
    )?
    .model;
    let metrics = evaluate(&predict_proba(&model, test.x())?, &test, 0, 0.5)?;
    println!("temporal test AUC {:.3}", metrics.auc);
    Ok(metrics.auc)
}

#[allow(dead_code)]
fn main() -> goal::Result<()> {
    run_example().map(|_| ())
}
