//! Survey weights change the target: the weighted estimator aims at the
//! whole population, the unweighted one at the sampled units.
//!
//! `cargo run --release --example survey_weights`

use transmed::data::EffectSpec;
use transmed::estimate::{estimate_effects, survey_weights, EstimatorOptions};
use transmed::sim::{correct_designs, generate, oracle_for, DgmParams, Population};

fn main() -> transmed::Result<()> {
    let params = DgmParams::default();
    let data = generate(&params, 50_000, 3);
    let spec = EffectSpec::new(1, 0)?;
    let weighted = survey_weights(&data)?;
    let (lo, hi) = weighted
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &g| {
            (lo.min(g), hi.max(g))
        });
    println!("weights range over [{lo:.3}, {hi:.3}]");

    let opts = EstimatorOptions::default();
    for (pop, gamma) in [
        (Population::Full, weighted),
        (Population::Sampled, vec![1.0; data.len()]),
    ] {
        let e = estimate_effects(&data, &correct_designs(), spec, &opts, &gamma)?;
        let t = oracle_for(&params, pop, spec);
        println!(
            "{:<8} theta(1,0) {:.4} vs {:.4}   sde {:.4} vs {:.4}",
            pop.label(),
            e.theta_ps.theta,
            t.theta_ps,
            e.sde.theta,
            t.sde
        );
    }
    Ok(())
}
