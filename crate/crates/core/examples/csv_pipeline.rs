//! Round trip through the CSV layout used by `transmed estimate`: write a
//! sample, read it back, estimate and render the effect table.
//!
//! `cargo run --release --example csv_pipeline`

use transmed::cli::{choose_designs, read_dataset, render, write_dataset, DesignMode, Format};
use transmed::data::EffectSpec;
use transmed::estimate::{estimate_effects, survey_weights, EstimatorKind, EstimatorOptions};
use transmed::sim::{generate, DgmParams};

fn main() -> transmed::Result<()> {
    let path = std::env::temp_dir().join("transmed-example.csv");
    let sample = generate(&DgmParams::default(), 8_000, 42);
    write_dataset(&sample, std::fs::File::create(&path)?)?;

    let data = read_dataset(std::fs::File::open(&path)?, Some((0.0, 1.0)))?;
    let gamma = survey_weights(&data)?;
    let designs = choose_designs(&data, DesignMode::Auto);
    let opts = EstimatorOptions {
        estimator: EstimatorKind::Tmle,
        ..Default::default()
    };
    let e = estimate_effects(&data, &designs, EffectSpec::new(1, 0)?, &opts, &gamma)?;

    #[derive(serde::Serialize)]
    struct Row {
        quantity: &'static str,
        estimate: f64,
        se: f64,
    }
    let rows: Vec<Row> = [("sde", &e.sde), ("sie", &e.sie)]
        .into_iter()
        .map(|(quantity, est)| Row {
            quantity,
            estimate: est.theta,
            se: est.se,
        })
        .collect();
    print!("{}", String::from_utf8_lossy(&render(&rows, Format::Csv)?));
    std::fs::remove_file(&path)?;
    Ok(())
}
