//! Monte Carlo performance summaries against an exact truth.

use serde::{Deserialize, Serialize};

/// One replication's point estimate and Wald interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepEstimate {
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// The six summary columns. Ratios that need a Monte Carlo spread are
/// absent with fewer than two replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mean_estimate: f64,
    pub abs_bias: f64,
    pub sqrt_n_abs_bias: f64,
    /// Mean standard error over the Monte Carlo standard deviation.
    pub relse: Option<f64>,
    /// `sqrt(n) * SD_MC / sigma`.
    pub relsd: Option<f64>,
    /// `n * MSE / sigma^2`.
    pub relrmse: Option<f64>,
    pub coverage: f64,
    /// Monte Carlo standard deviation (divisor `R`).
    pub sd_mc: f64,
}

/// Summarises `reps` against `truth`. `n` is the number of units drawn per
/// replication and `sigma2` the matching asymptotic variance.
///
/// `SD_MC` uses divisor `R`, so that `relrmse = relsd^2 + n bias^2 / sigma^2`
/// holds exactly.
pub fn compute_metrics(reps: &[RepEstimate], truth: f64, sigma2: f64, n: usize) -> Metrics {
    let r = reps.len() as f64;
    let nf = n as f64;
    let mean = reps.iter().map(|e| e.estimate).sum::<f64>() / r;
    let bias = mean - truth;
    let sd_mc = (reps
        .iter()
        .map(|e| (e.estimate - mean).powi(2))
        .sum::<f64>()
        / r)
        .sqrt();
    let mse = reps
        .iter()
        .map(|e| (e.estimate - truth).powi(2))
        .sum::<f64>()
        / r;
    let mean_se = reps.iter().map(|e| e.se).sum::<f64>() / r;
    let covered = reps
        .iter()
        .filter(|e| e.ci_lo <= truth && truth <= e.ci_hi)
        .count() as f64;
    let spread = reps.len() >= 2;
    Metrics {
        mean_estimate: mean,
        abs_bias: bias.abs(),
        sqrt_n_abs_bias: nf.sqrt() * bias.abs(),
        relse: spread.then(|| mean_se / sd_mc),
        relsd: spread.then(|| nf.sqrt() * sd_mc / sigma2.sqrt()),
        relrmse: spread.then(|| nf * mse / sigma2),
        coverage: covered / r,
        sd_mc,
    }
}
