// Write data and a fitted model to disk, read them back and check that
// predictions are unchanged.

use goal::datagen::{generate_worms, WormsSpec};
use goal::io::{load_dataset, load_model, save_model, write_features, write_labels, Orientation};
use goal::{fit, predict_proba, FitConfig};

pub fn run_example() -> goal::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| goal::GoalError::Io {
        path: std::env::temp_dir(),
        source: e,
    })?;
    let data = generate_worms(&WormsSpec {
        t: 120,
        d: 4,
        seed: 2,
        ..WormsSpec::default()
    })?;
    let (xf, yf) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    write_features(&xf, data.x())?;
    write_labels(&yf, data.pi())?;
    let reloaded = load_dataset(&xf, &yf, Orientation::Instances)?;
    assert_eq!(reloaded, data);

    let model = fit(
        &reloaded,
        &FitConfig {
            k: 5,
            ..FitConfig::default()
        },
    )?
    .model;
    let mf = dir.path().join("model.json");
    save_model(&mf, &model, None)?;
    let back = load_model(&mf)?;
    assert_eq!(predict_proba(&back, data.x())?, predict_proba(&model, data.x())?);
    println!(
        "model with D={} G={} K={} M={} survives a save/load round trip",
        back.d(),
        back.g(),
        back.k(),
        back.m()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> goal::Result<()> {
    run_example()
}
