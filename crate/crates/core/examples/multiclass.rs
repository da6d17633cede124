// Three classes with soft labels.

use goal::numerics::{gaussian_matrix, seeded_rng};
use goal::{fit, predict_proba, DataSet, FitConfig, Matrix};

pub fn run_example() -> goal::Result<Matrix> {
    let per_class = 30;
    let centres = [(0.0, 4.0), (-4.0, -2.0), (4.0, -2.0)];
    let mut rng = seeded_rng(8);
    let mut x = gaussian_matrix(3, 3 * per_class, &mut rng);
    let mut pi = Matrix::zeros(3, 3 * per_class);
    for (c, &(a, b)) in centres.iter().enumerate() {
        for i in 0..per_class {
            let t = c * per_class + i;
            x[(0, t)] += a;
            x[(1, t)] += b;
            // Mostly confident labels with a little mass on the other classes.
            for m in 0..3 {
                pi[(m, t)] = if m == c { 0.9 } else { 0.05 };
            }
        }
    }
    let data = DataSet::new(x, pi)?;
    let model = fit(
        &data,
        &FitConfig {
            k: 3,
            g: 2,
            eps_cl: 1.0,
            ..FitConfig::default()
        },
    )?
    .model;
    let probe = Matrix::from_column_slice(3, 3, &[0.0, 4.0, 0.0, -4.0, -2.0, 0.0, 4.0, -2.0, 0.0]);
    let proba = predict_proba(&model, &probe)?;
    for (i, col) in proba.column_iter().enumerate() {
        println!("probe {i}: {:.3} {:.3} {:.3}", col[0], col[1], col[2]);
    }
    Ok(proba)
}

#[allow(dead_code)]
fn main() -> goal::Result<()> {
    run_example().map(|_| ())
}
