//! A small replicated study with the performance metrics of each estimator.
//!
//! `cargo run --release --example simulation_study`

use transmed::nuisance::{Component, MisspecSet};
use transmed::sim::{run_grid, ScenarioSpec};

fn main() -> transmed::Result<()> {
    let specs: Vec<ScenarioSpec> = [MisspecSet::none(), MisspecSet::of(&[Component::Q])]
        .into_iter()
        .map(|mis| ScenarioSpec {
            label: format!("n2000-{mis}"),
            n: 2_000,
            reps: 40,
            mis,
            seed: 9,
            ..Default::default()
        })
        .collect();
    let rows = run_grid(&specs, |s, _| eprintln!("finished {}", s.label))?;
    println!(
        "{:<12} {:<5} {:<4} {:>8} {:>9} {:>7} {:>7} {:>8}",
        "scenario", "est", "eff", "bias", "rtn*bias", "relse", "relsd", "cover"
    );
    for r in rows {
        println!(
            "{:<12} {:<5} {:<4} {:>8.4} {:>9.3} {:>7.3} {:>7.3} {:>8.3}",
            r.label,
            r.estimator,
            r.effect,
            r.mean_estimate - r.truth,
            r.sqrt_n_abs_bias,
            r.relse.unwrap_or(f64::NAN),
            r.relsd.unwrap_or(f64::NAN),
            r.coverage
        );
    }
    Ok(())
}
