//! Replicated simulation scenarios and grids of them.
//!
//! Replication `r` of a scenario with master seed `s` draws its data from
//! stream `r` of the generator keyed by `s`, and the replications are
//! collected in index order, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::EffectSpec;
use crate::error::{Error, Result};
use crate::estimate::{
    estimate_effects_multi, survey_weights, EffectEstimates, Estimate, EstimatorKind,
    EstimatorOptions,
};
use crate::nuisance::{Component, MisspecSet};

use super::dgm::{generate_stream, DgmParams};
use super::metrics::{compute_metrics, RepEstimate};
use super::oracle::{correct_designs, oracle_for, OracleTruths, Population};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectKind {
    Sde,
    Sie,
}

impl EffectKind {
    pub fn label(self) -> &'static str {
        match self {
            EffectKind::Sde => "sde",
            EffectKind::Sie => "sie",
        }
    }

    pub fn truth(self, t: &OracleTruths) -> (f64, f64) {
        match self {
            EffectKind::Sde => (t.sde, t.sigma2_sde),
            EffectKind::Sie => (t.sie, t.sigma2_sie),
        }
    }

    pub fn pick(self, e: &EffectEstimates) -> &Estimate {
        match self {
            EffectKind::Sde => &e.sde,
            EffectKind::Sie => &e.sie,
        }
    }
}

/// The eleven misspecification rows of the reference study: none, each
/// component alone, and two combined sets.
pub fn misspecification_grid() -> Vec<MisspecSet> {
    use Component::*;
    let mut out = vec![MisspecSet::none()];
    out.extend([C, G, E, Q, R, B, U, V].map(|c| MisspecSet::of(&[c])));
    out.push(MisspecSet::of(&[C, E, R, U, V]));
    out.push(MisspecSet::of(&[C, G, E, R, U]));
    out
}

/// One scenario: everything needed to reproduce a set of result rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub label: String,
    /// Units drawn per replication, before sample selection.
    pub n: usize,
    pub reps: usize,
    pub mis: MisspecSet,
    pub estimators: Vec<EstimatorKind>,
    pub effects: Vec<EffectKind>,
    pub folds: usize,
    pub seed: u64,
    /// Use survey weights and target the full population; otherwise target
    /// the sampled sub-population without weights.
    pub weighted: bool,
    pub tmle_weighted_fluctuation: bool,
    pub g_empirical: bool,
    pub params: DgmParams,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            label: String::new(),
            n: 10_000,
            reps: 200,
            mis: MisspecSet::none(),
            estimators: vec![EstimatorKind::OneStep, EstimatorKind::Tmle],
            effects: vec![EffectKind::Sde, EffectKind::Sie],
            folds: 1,
            seed: 1,
            weighted: true,
            tmle_weighted_fluctuation: true,
            g_empirical: false,
            params: DgmParams::default(),
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("scenario `{}`: {m}", self.label)));
        if self.reps < 1 {
            return fail("reps must be at least 1".into());
        }
        if self.n < 100 {
            return fail(format!("n = {} is below the minimum of 100", self.n));
        }
        if self.folds < 1 {
            return fail("folds must be at least 1".into());
        }
        if self.estimators.is_empty() || self.effects.is_empty() {
            return fail("needs at least one estimator and one effect".into());
        }
        Ok(())
    }

    pub fn population(&self) -> Population {
        if self.weighted {
            Population::Full
        } else {
            Population::Sampled
        }
    }

    fn options(&self, rep: usize) -> EstimatorOptions {
        EstimatorOptions {
            estimator: self.estimators[0],
            tmle_weighted_fluctuation: self.tmle_weighted_fluctuation,
            max_targeting_iters: 20,
            folds: self.folds,
            seed: fold_seed(self.seed, rep),
            g_empirical: self.g_empirical,
            misspecified: self.mis.clone(),
        }
    }
}

/// Seed for replication `rep`'s fold assignment.
fn fold_seed(master: u64, rep: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = master ^ (rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One result row: labels, the six summary columns and a few diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub label: String,
    pub mis: String,
    pub estimator: String,
    pub effect: String,
    pub population: String,
    pub n: usize,
    pub reps: usize,
    pub folds: usize,
    pub truth: f64,
    pub sigma2: f64,
    pub mean_estimate: f64,
    pub abs_bias: f64,
    pub sqrt_n_abs_bias: f64,
    pub relse: Option<f64>,
    pub relsd: Option<f64>,
    pub relrmse: Option<f64>,
    pub coverage: f64,
    pub failed: usize,
    /// Corner fits whose targeting hit the iteration cap.
    pub tmle_unconverged: usize,
    /// Largest `|score| / bound` over converged targeting runs.
    pub tmle_max_score_ratio: Option<f64>,
    /// Largest `|mean (D_M + D_W)|` over converged targeting runs.
    pub tmle_max_mw_score: Option<f64>,
}

/// Results of one replication, per estimator.
type RepOutcome = Result<Vec<EffectEstimates>>;

fn run_rep(spec: &ScenarioSpec, rep: usize) -> RepOutcome {
    let data = generate_stream(&spec.params, spec.n, spec.seed, rep as u64);
    let gamma = if spec.weighted {
        survey_weights(&data)?
    } else {
        vec![1.0; data.len()]
    };
    estimate_effects_multi(
        &data,
        &correct_designs(),
        EffectSpec {
            a_prime: 1,
            a_star: 0,
        },
        &spec.options(rep),
        &gamma,
        &spec.estimators,
    )
}

/// Runs every replication of `spec` (in parallel on the current rayon pool)
/// and returns one row per (estimator, effect).
pub fn run_scenario(spec: &ScenarioSpec) -> Result<Vec<MetricsRow>> {
    spec.validate()?;
    let truths = oracle_for(
        &spec.params,
        spec.population(),
        EffectSpec {
            a_prime: 1,
            a_star: 0,
        },
    );
    let outcomes: Vec<RepOutcome> = (0..spec.reps)
        .into_par_iter()
        .map(|r| run_rep(spec, r))
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    // More than 1% failed replications invalidates the scenario.
    if failed * 100 > spec.reps {
        return Err(Error::ScenarioAborted {
            label: spec.label.clone(),
            failed,
            reps: spec.reps,
        });
    }
    let ok: Vec<&Vec<EffectEstimates>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();

    let mut rows = Vec::new();
    for (k, kind) in spec.estimators.iter().enumerate() {
        let mut unconverged = 0;
        let mut max_ratio: Option<f64> = None;
        let mut max_mw: Option<f64> = None;
        if *kind == EstimatorKind::Tmle {
            for est in &ok {
                let e = &est[k];
                for corner in [&e.theta_pp, &e.theta_ps, &e.theta_ss] {
                    let d = &corner.diagnostics;
                    if d.converged {
                        let ratio = d.final_score / d.score_bound;
                        max_ratio = Some(max_ratio.map_or(ratio, |m| m.max(ratio)));
                        max_mw = Some(max_mw.map_or(d.mw_score, |m| m.max(d.mw_score)));
                    } else {
                        unconverged += 1;
                    }
                }
            }
        }
        for effect in &spec.effects {
            let (truth, sigma2) = effect.truth(&truths);
            let reps: Vec<RepEstimate> = ok
                .iter()
                .map(|est| {
                    let e = effect.pick(&est[k]);
                    RepEstimate {
                        estimate: e.theta,
                        se: e.se,
                        ci_lo: e.ci.0,
                        ci_hi: e.ci.1,
                    }
                })
                .collect();
            let m = compute_metrics(&reps, truth, sigma2, spec.n);
            rows.push(MetricsRow {
                label: spec.label.clone(),
                mis: spec.mis.to_string(),
                estimator: kind.label().to_string(),
                effect: effect.label().to_string(),
                population: spec.population().label().to_string(),
                n: spec.n,
                reps: spec.reps,
                folds: spec.folds,
                truth,
                sigma2,
                mean_estimate: m.mean_estimate,
                abs_bias: m.abs_bias,
                sqrt_n_abs_bias: m.sqrt_n_abs_bias,
                relse: m.relse,
                relsd: m.relsd,
                relrmse: m.relrmse,
                coverage: m.coverage,
                failed,
                tmle_unconverged: unconverged,
                tmle_max_score_ratio: max_ratio,
                tmle_max_mw_score: max_mw,
            });
        }
    }
    Ok(rows)
}

/// Scenario file layout: shared defaults plus a list of scenarios that
/// override any of them.
///
/// ```toml
/// [defaults]
/// n = 10000
/// reps = 200
/// estimators = ["os", "tmle"]
/// effects = ["sde"]
///
/// [[scenario]]
/// mis = "none"
///
/// [[scenario]]
/// mis = "c,e,r,u,v"
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default)]
    pub defaults: ScenarioPatch,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioPatch>,
    /// Shorthand for one scenario per misspecification row of the study.
    #[serde(default)]
    pub full_grid: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioPatch {
    pub label: Option<String>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub mis: Option<String>,
    pub estimators: Option<Vec<EstimatorKind>>,
    pub effects: Option<Vec<EffectKind>>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub weighted: Option<bool>,
    pub tmle_weighted_fluctuation: Option<bool>,
    pub g_empirical: Option<bool>,
    /// `key = value` coefficient overrides, e.g. `{ "y.m" = 0.0 }`.
    pub params: Option<std::collections::BTreeMap<String, f64>>,
}

impl ScenarioPatch {
    fn apply(&self, mut s: ScenarioSpec) -> Result<ScenarioSpec> {
        if let Some(v) = &self.label {
            s.label = v.clone();
        }
        if let Some(v) = self.n {
            s.n = v;
        }
        if let Some(v) = self.reps {
            s.reps = v;
        }
        if let Some(v) = &self.mis {
            s.mis = v.parse()?;
        }
        if let Some(v) = &self.estimators {
            s.estimators = v.clone();
        }
        if let Some(v) = &self.effects {
            s.effects = v.clone();
        }
        if let Some(v) = self.folds {
            s.folds = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.weighted {
            s.weighted = v;
        }
        if let Some(v) = self.tmle_weighted_fluctuation {
            s.tmle_weighted_fluctuation = v;
        }
        if let Some(v) = self.g_empirical {
            s.g_empirical = v;
        }
        if let Some(p) = &self.params {
            for (k, v) in p {
                s.params.set(k, *v)?;
            }
        }
        Ok(s)
    }
}

/// Parses a scenario file into validated scenarios. `seed`, when given,
/// replaces every scenario's seed.
pub fn parse_grid(text: &str, seed: Option<u64>) -> Result<Vec<ScenarioSpec>> {
    let file: GridFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let base = file.defaults.apply(ScenarioSpec::default())?;
    let mut patches = file.scenarios.clone();
    if file.full_grid {
        patches.extend(misspecification_grid().into_iter().map(|m| ScenarioPatch {
            mis: Some(m.to_string()),
            ..ScenarioPatch::default()
        }));
    }
    if patches.is_empty() {
        patches.push(ScenarioPatch::default());
    }
    let specs = patches
        .iter()
        .map(|p| {
            let mut s = p.apply(base.clone())?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if p.label.is_none() {
                s.label = format!("n{}-{}", s.n, s.mis);
            }
            s.validate()?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(specs)
}

/// Runs scenarios in order; `progress` is called after each one.
pub fn run_grid(
    specs: &[ScenarioSpec],
    mut progress: impl FnMut(&ScenarioSpec, &[MetricsRow]),
) -> Result<Vec<MetricsRow>> {
    let mut out = Vec::new();
    for s in specs {
        let rows = run_scenario(s)?;
        progress(s, &rows);
        out.extend(rows);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_rows() {
        let g = misspecification_grid();
        assert_eq!(g.len(), 11);
        let labels: Vec<String> = g.iter().map(|m| m.to_string()).collect();
        assert_eq!(labels[0], "none");
        assert!(labels.contains(&"c,e,r,u,v".to_string()));
        assert!(labels.contains(&"c,g,e,r,u".to_string()));
        for m in &g {
            let parsed: MisspecSet = m.to_string().parse().unwrap();
            assert_eq!(&parsed, m);
        }
    }

    #[test]
    fn grid_file_expands() {
        let text = r#"
            full_grid = true
            [defaults]
            n = 1000
            reps = 20
            estimators = ["os", "tmle"]
            effects = ["sde"]
        "#;
        let specs = parse_grid(text, Some(5)).unwrap();
        assert_eq!(specs.len(), 11);
        let rows: usize = specs
            .iter()
            .map(|s| s.estimators.len() * s.effects.len())
            .sum();
        assert_eq!(rows, 22);
        assert!(specs.iter().all(|s| s.seed == 5 && s.n == 1000));
    }

    #[test]
    fn zero_reps_rejected() {
        let text = "[[scenario]]\nreps = 0\n";
        assert!(matches!(parse_grid(text, None), Err(Error::Config(_))));
        let text = "[[scenario]]\nn = 50\n";
        assert!(parse_grid(text, None).is_err());
        assert!(parse_grid("[[scenario]]\nbogus = 1\n", None).is_err());
    }

    #[test]
    fn small_scenario_runs_and_is_deterministic() {
        let spec = ScenarioSpec {
            label: "tiny".into(),
            n: 2000,
            reps: 4,
            effects: vec![EffectKind::Sde, EffectKind::Sie],
            ..ScenarioSpec::default()
        };
        let a = run_scenario(&spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| run_scenario(&spec)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        for r in &a {
            let gap = r.relrmse.unwrap()
                - r.relsd.unwrap().powi(2)
                - r.sqrt_n_abs_bias.powi(2) / r.sigma2;
            assert!(gap.abs() < 1e-12);
        }
    }

    #[test]
    fn single_rep_omits_spread_columns() {
        let spec = ScenarioSpec {
            n: 1500,
            reps: 1,
            estimators: vec![EstimatorKind::OneStep],
            effects: vec![EffectKind::Sde],
            ..ScenarioSpec::default()
        };
        let rows = run_scenario(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].relse.is_none() && rows[0].relrmse.is_none());
        assert!(rows[0].abs_bias.is_finite());
    }
}
