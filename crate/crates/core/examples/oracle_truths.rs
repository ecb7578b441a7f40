//! Exact effects of the simulation mechanism, by enumeration.
//!
//! `cargo run --example oracle_truths`

use transmed::data::EffectSpec;
use transmed::sim::{oracle_for, DgmParams, Population};

fn main() -> transmed::Result<()> {
    let spec = EffectSpec::new(1, 0)?;
    let default = DgmParams::default();
    // Switching off the mediator's effect on the outcome removes the
    // indirect effect entirely.
    let no_mediation = DgmParams::default().with_overrides(&["y.m=0"])?;

    for (name, params) in [("default", default), ("y.m = 0", no_mediation)] {
        println!("{name}");
        for pop in [Population::Full, Population::Sampled] {
            let t = oracle_for(&params, pop, spec);
            println!(
                "  {:<8} theta(1,1) {:.6}  theta(1,0) {:.6}  theta(0,0) {:.6}  sde {:.6} (var {:.3})  sie {:.6} (var {:.3})",
                pop.label(),
                t.theta_pp,
                t.theta_ps,
                t.theta_ss,
                t.sde,
                t.sigma2_sde,
                t.sie,
                t.sigma2_sie
            );
        }
    }
    println!(
        "P(Delta = 1) = {:.4}",
        oracle_for(&default, Population::Full, spec).p_selected
    );
    Ok(())
}
