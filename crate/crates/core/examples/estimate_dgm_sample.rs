//! One-step and TMLE estimates on a single simulated survey sample.
//!
//! `cargo run --release --example estimate_dgm_sample`

use transmed::data::EffectSpec;
use transmed::estimate::{estimate_effects_multi, survey_weights, EstimatorKind, EstimatorOptions};
use transmed::sim::{correct_designs, generate, oracle, DgmParams};

fn main() -> transmed::Result<()> {
    let params = DgmParams::default();
    let data = generate(&params, 10_000, 2024);
    let gamma = survey_weights(&data)?;
    let truth = oracle(&params);
    println!(
        "{} selected units, {} in the target population",
        data.len(),
        data.rows.iter().filter(|r| r.is_target()).count()
    );

    let both = [EstimatorKind::OneStep, EstimatorKind::Tmle];
    let fits = estimate_effects_multi(
        &data,
        &correct_designs(),
        EffectSpec::new(1, 0)?,
        &EstimatorOptions::default(),
        &gamma,
        &both,
    )?;
    for (kind, e) in both.iter().zip(&fits) {
        println!("{}", kind.label());
        for (name, est, t) in [("sde", &e.sde, truth.sde), ("sie", &e.sie, truth.sie)] {
            println!(
                "  {name}  {:.4}  se {:.4}  95% CI [{:.4}, {:.4}]  truth {:.4}",
                est.theta, est.se, est.ci.0, est.ci.1, t
            );
        }
        let d = e.theta_ps.diagnostics;
        if *kind == EstimatorKind::Tmle {
            println!(
                "  targeting: {} iteration(s), score {:.1e} (bound {:.1e})",
                d.tmle_iterations, d.final_score, d.score_bound
            );
        }
    }
    Ok(())
}
