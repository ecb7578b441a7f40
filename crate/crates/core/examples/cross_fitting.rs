//! Cross-fitted estimates next to the single-fit ones.
//!
//! Every fold's training complement must populate the cells of the
//! full-factorial designs, so cross-fitting with them needs a large sample.
//!
//! `cargo run --release --example cross_fitting`

use transmed::data::EffectSpec;
use transmed::estimate::{estimate_effects, survey_weights, EstimatorKind, EstimatorOptions};
use transmed::nuisance::Designs;
use transmed::sim::{correct_designs, generate, oracle, DgmParams};

fn main() -> transmed::Result<()> {
    let params = DgmParams::default();
    let data = generate(&params, 40_000, 7);
    let gamma = survey_weights(&data)?;
    let truth = oracle(&params);
    println!("truth: sde {:.4}  sie {:.4}", truth.sde, truth.sie);

    for (label, designs) in [
        ("full-factorial", correct_designs()),
        ("main effects", Designs::main_effects(data.p(), data.q())),
    ] {
        for folds in [1, 5] {
            let opts = EstimatorOptions {
                estimator: EstimatorKind::Tmle,
                folds,
                seed: 11,
                ..Default::default()
            };
            let e = estimate_effects(&data, &designs, EffectSpec::new(1, 0)?, &opts, &gamma)?;
            println!(
                "{label:<15} folds {folds}: sde {:.4} ({:.4})  sie {:.4} ({:.4})",
                e.sde.theta, e.sde.se, e.sie.theta, e.sie.se
            );
        }
    }
    Ok(())
}
