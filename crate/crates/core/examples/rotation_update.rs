// The rotation step in isolation: for fixed boxes and affiliations, the
// closed-form rotation fits at least as well as any sampled one.

use goal::model::{r_step, rotation_objective, s_step, Affiliation};
use goal::numerics::{gaussian_matrix, random_orthonormal, seeded_rng};
use goal::{DataSet, Matrix};

pub fn run_example() -> goal::Result<(f64, f64)> {
    let (d, g, k, t) = (6, 2, 3, 40);
    let mut rng = seeded_rng(4);
    let x = gaussian_matrix(d, t, &mut rng);
    let labels: Vec<u8> = (0..t).map(|i| (i % 2) as u8).collect();
    let data = DataSet::new(x, goal::model::one_hot_binary(&labels)?)?;
    let gamma = Affiliation::random(k, t, 1)?;
    let s = s_step(&data, &gamma, &random_orthonormal(d, g, 2)?)?.s;

    let r: Matrix = r_step(&data, &gamma, &s)?;
    let closed_form = rotation_objective(&data, &gamma, &r, &s);
    let best_sampled = (0..200)
        .map(|i| random_orthonormal(d, g, 100 + i).map(|q| rotation_objective(&data, &gamma, &q, &s)))
        .collect::<goal::Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    println!("closed form {closed_form:.4} vs best of 200 random rotations {best_sampled:.4}");
    Ok((closed_form, best_sampled))
}

#[allow(dead_code)]
fn main() -> goal::Result<()> {
    run_example().map(|_| ())
}
