// Cross-validated selection of K and ε_CL.

use goal::datagen::{generate_worms, WormsSpec};
use goal::evaluation::{grid_search, EvalOptions, GridResult, GridSpec, SplitKind, SplitPlan};
use goal::FitConfig;

pub fn run_example() -> goal::Result<GridResult> {
    let data = generate_worms(&WormsSpec {
        t: 200,
        d: 6,
        seed: 3,
        ..WormsSpec::default()
    })?;
    let grid = GridSpec {
        k: vec![2, 4, 8],
        g: vec![2],
        eps_cl: vec![0.1, 10.0],
        base: FitConfig {
            n_restarts: 4,
            ..FitConfig::default()
        },
    };
    // Hold out a validation part so the test AUC is not used for selection.
    let plan = SplitPlan {
        kind: SplitKind::RandomHoldout,
        train_fraction: 0.6,
        validation_fraction: 0.2,
        replicates: 5,
        seed: 11,
        ..SplitPlan::default()
    };
    let result = grid_search(&data, &grid, &plan, EvalOptions::default())?;
    for row in &result.rows {
        println!(
            "K={:<2} eps_cl={:<5} params={:<3} validation AUC {:.3}  test AUC {:.3} ± {:.3}",
            row.config.k, row.config.eps_cl, row.parameter_count, row.mean_auc, row.mean_test_auc, row.test_auc_ci
        );
    }
    if let Some(best) = result.best_row() {
        println!("selected K={} eps_cl={}", best.config.k, best.config.eps_cl);
    }
    Ok(result)
}

#[allow(dead_code)]
fn main() -> goal::Result<()> {
    run_example().map(|_| ())
}
