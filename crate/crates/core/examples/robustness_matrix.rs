//! Population bias of the influence-function estimating equation when
//! nuisance components are fitted intercept-only: the large-sample limit of
//! the one-step estimator in each row of the misspecification grid.
//!
//! `cargo run --release --example robustness_matrix`

use transmed::data::EffectSpec;
use transmed::sim::oracle::{limit_suite, population_eif_mean};
use transmed::sim::{cells, misspecification_grid, oracle, DgmParams, Population};

fn main() -> transmed::Result<()> {
    let params = DgmParams::default();
    let pop = Population::Full;
    let cs = cells(&params, pop);
    let truth = oracle(&params);
    let corners = [
        (EffectSpec::new(1, 1)?, truth.theta_pp),
        (EffectSpec::new(1, 0)?, truth.theta_ps),
        (EffectSpec::new(0, 0)?, truth.theta_ss),
    ];
    println!("{:<12} {:>10} {:>10}", "wrong", "sde bias", "sie bias");
    for mis in misspecification_grid() {
        let mut mean = [0.0; 3];
        for (k, (spec, theta)) in corners.iter().enumerate() {
            let suite = limit_suite(&params, pop, *spec, &mis)?;
            mean[k] = population_eif_mean(&cs, &suite, *theta)?;
        }
        println!(
            "{:<12} {:>10.4} {:>10.4}",
            mis.to_string(),
            mean[1] - mean[2],
            mean[0] - mean[1]
        );
    }
    Ok(())
}
