// Train on synthetic worms data and score a held-out part.

use goal::datagen::{generate_worms, WormsSpec};
use goal::evaluation::evaluate;
use goal::{fit, predict_proba, FitConfig};

pub fn run_example() -> goal::Result<f64> {
    let data = generate_worms(&WormsSpec {
        t: 300,
        d: 10,
        seed: 1,
        ..WormsSpec::default()
    })?;
    let train_idx: Vec<usize> = (0..225).collect();
    let test_idx: Vec<usize> = (225..300).collect();
    let (train, test) = (data.subset(&train_idx)?, data.subset(&test_idx)?);

    let config = FitConfig {
        k: 8,
        g: 2,
        eps_cl: 1.0,
        ..FitConfig::default()
    };
    let outcome = fit(&train, &config)?;
    println!(
        "objective {:.4} after {} iterations; best restart {}",
        outcome.report.final_objective, outcome.report.iterations, outcome.report.restart_index_of_best
    );

    let proba = predict_proba(&outcome.model, test.x())?;
    let metrics = evaluate(&proba, &test, 0, 0.5)?;
    println!("held-out AUC {:.3}, accuracy {:.3}", metrics.auc, metrics.accuracy);
    Ok(metrics.auc)
}

#[allow(dead_code)]
fn main() -> goal::Result<()> {
    run_example().map(|_| ())
}
