//! One-step and targeted (TMLE) estimators of `theta(a', a*)` and of the
//! transported stochastic direct and indirect effects.
//!
//! Both estimators share one set of base nuisance fits (`t, b, c, g, q, r,
//! e`) across the three effect corners; only `u` and `v` are refitted per
//! corner. Survey weights `gamma` multiply every influence-function term and
//! every regression. With `folds > 1` every quantity attached to row `i` is
//! evaluated with the suite trained on the other folds.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{scale_outcome, validate_ref, Dataset, EffectSpec, OutcomeScale};
use crate::eif::{eif_row, eif_sample, mean_and_variance, Folded, NuisanceByRow};
use crate::error::{Error, Result};
use crate::nuisance::{
    fit_suite, fit_u, fit_v, marginalized_outcome, target_share, Designs, MisspecSet, Nuisance,
    NuisanceEstimates, SuiteOptions, H_MAX,
};
use crate::regress::{self, clamp_prob, expit, logit, DesignSpec, FitOptions, FittedModel, Matrix};

/// Normal quantile for two-sided 95% Wald intervals.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "os")]
    OneStep,
    #[serde(rename = "tmle")]
    Tmle,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::OneStep => "os",
            EstimatorKind::Tmle => "tmle",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "os" | "one_step" | "one-step" => Ok(EstimatorKind::OneStep),
            "tmle" => Ok(EstimatorKind::Tmle),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub estimator: EstimatorKind,
    /// Move inverse-probability factors into the fluctuation weights.
    pub tmle_weighted_fluctuation: bool,
    pub max_targeting_iters: usize,
    /// Number of cross-fitting folds; 1 disables cross-fitting.
    pub folds: usize,
    pub seed: u64,
    pub g_empirical: bool,
    pub misspecified: MisspecSet,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            estimator: EstimatorKind::OneStep,
            tmle_weighted_fluctuation: true,
            max_targeting_iters: 20,
            folds: 1,
            seed: 0,
            g_empirical: false,
            misspecified: MisspecSet::none(),
        }
    }
}

impl EstimatorOptions {
    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 {
            return Err(Error::Config("folds must be at least 1".into()));
        }
        if self.max_targeting_iters == 0 {
            return Err(Error::Config(
                "max_targeting_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn suite_options(&self) -> SuiteOptions {
        SuiteOptions {
            g_empirical: self.g_empirical,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub tmle_iterations: usize,
    /// `|n^-1 sum gamma (D_Y + D_Z)|` after targeting.
    pub final_score: f64,
    /// Stopping threshold `1 / (sqrt(n) log n)`.
    pub score_bound: f64,
    /// `|n^-1 sum gamma (D_M + D_W)|` after targeting.
    pub mw_score: f64,
    /// False when targeting hit the iteration cap without meeting the bound.
    pub converged: bool,
    /// Outcome-term rows where the density ratio hit `H_MAX`.
    pub clamp_hits: usize,
}

/// Point estimate with influence-function based inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// On the original outcome scale.
    pub theta: f64,
    pub se: f64,
    pub ci: (f64, f64),
    /// On the unit outcome scale.
    pub scale: f64,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    fn new(theta: f64, se: f64, scale: f64, diagnostics: Diagnostics) -> Self {
        Estimate {
            theta,
            se,
            ci: (theta - Z_95 * se, theta + Z_95 * se),
            scale,
            diagnostics,
        }
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci.0 <= truth && truth <= self.ci.1
    }
}

/// Unit-scale estimate of one corner together with its weighted influence
/// function values `gamma_i * D(O_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerFit {
    pub theta: f64,
    pub ic: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl CornerFit {
    pub fn se(&self) -> f64 {
        ic_se(&self.ic)
    }

    pub fn to_estimate(&self, scale: &OutcomeScale) -> Estimate {
        Estimate::new(
            scale.level_from_unit(self.theta),
            scale.spread_from_unit(self.se()),
            self.theta,
            self.diagnostics,
        )
    }
}

fn ic_se(ic: &[f64]) -> f64 {
    (mean_and_variance(ic).1 / ic.len() as f64).sqrt()
}

/// Contrast `first - second` with SE from the per-row influence difference.
pub fn contrast(first: &CornerFit, second: &CornerFit, scale: &OutcomeScale) -> Estimate {
    let ic: Vec<f64> = first
        .ic
        .iter()
        .zip(&second.ic)
        .map(|(a, b)| a - b)
        .collect();
    let diff = first.theta - second.theta;
    Estimate::new(
        scale.spread_from_unit(diff),
        scale.spread_from_unit(ic_se(&ic)),
        diff,
        Diagnostics::default(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimates {
    /// theta(a', a')
    pub theta_pp: Estimate,
    /// theta(a', a*)
    pub theta_ps: Estimate,
    /// theta(a*, a*)
    pub theta_ss: Estimate,
    pub sde: Estimate,
    pub sie: Estimate,
}

/// Normalised inverse sampling-probability weights
/// `gamma_i = (1 / pi_i) * sum(1 - s) / sum((1 - s) / pi)` over selected
/// rows. Rows with `delta = 0` get weight 0.
pub fn survey_weights(data: &Dataset) -> Result<Vec<f64>> {
    let mut n_target = 0.0;
    let mut inv_target = 0.0;
    for (i, r) in data.rows.iter().enumerate() {
        if r.delta != 1 {
            continue;
        }
        let pi = r.pi.ok_or(Error::MissingPi { row: i })?;
        if r.is_target() {
            n_target += 1.0;
            inv_target += 1.0 / pi;
        }
    }
    if n_target == 0.0 {
        return Err(Error::EmptyArm { s: 0 });
    }
    let norm = n_target / inv_target;
    Ok(data
        .rows
        .iter()
        .map(|r| match (r.delta, r.pi) {
            (1, Some(pi)) => norm / pi,
            _ => 0.0,
        })
        .collect())
}

/// Assignment of rows to cross-fitting folds.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub fold_of: Vec<usize>,
    pub folds: usize,
}

impl FoldPlan {
    /// A single fold whose training set is the whole sample.
    pub fn whole(n: usize) -> Self {
        FoldPlan {
            fold_of: vec![0; n],
            folds: 1,
        }
    }

    /// Seeded random partition into `folds` groups of near-equal size.
    pub fn random(n: usize, folds: usize, seed: u64) -> Self {
        if folds <= 1 {
            return FoldPlan::whole(n);
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut fold_of = vec![0; n];
        for (k, i) in idx.into_iter().enumerate() {
            fold_of[i] = k % folds;
        }
        FoldPlan { fold_of, folds }
    }

    pub fn explicit(fold_of: Vec<usize>) -> Self {
        let folds = fold_of.iter().max().map_or(1, |m| m + 1);
        FoldPlan { fold_of, folds }
    }

    /// Row indices used to train the suite applied to fold `j`.
    pub fn train(&self, j: usize) -> Vec<usize> {
        if self.folds == 1 {
            return (0..self.fold_of.len()).collect();
        }
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != j)
            .collect()
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if self.fold_of.len() != data.len() {
            return Err(Error::DimensionMismatch("fold assignment length".into()));
        }
        for j in 0..self.folds {
            if self.folds > 1 && !self.fold_of.contains(&j) {
                return Err(Error::FoldTooSmall {
                    fold: j,
                    reason: "no validation rows".into(),
                });
            }
            let train = self.train(j);
            for s in 0..2u8 {
                if !train.iter().any(|&i| data.rows[i].s == s) {
                    return Err(Error::FoldTooSmall {
                        fold: j,
                        reason: format!("training complement has no rows with s={s}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-fold training data and the base suites fitted on it.
pub struct FoldFits {
    pub plan: FoldPlan,
    pub train_data: Vec<Dataset>,
    pub train_weights: Vec<Vec<f64>>,
    pub suites: Vec<NuisanceEstimates>,
}

impl FoldFits {
    /// Fits the corner-independent components on each training set. `t` is
    /// taken from the full sample so the plug-in term is an exact weighted
    /// mean over target rows.
    pub fn fit(
        data: &Dataset,
        designs: &Designs,
        spec: EffectSpec,
        gamma: &[f64],
        plan: FoldPlan,
        mis: &MisspecSet,
        opts: &SuiteOptions,
    ) -> Result<Self> {
        plan.check(data)?;
        let t = target_share(data, gamma);
        let mut train_data = Vec::with_capacity(plan.folds);
        let mut train_weights = Vec::with_capacity(plan.folds);
        let mut suites = Vec::with_capacity(plan.folds);
        for j in 0..plan.folds {
            let idx = plan.train(j);
            let d = data.subset(&idx);
            let w: Vec<f64> = idx.iter().map(|&i| gamma[i]).collect();
            suites.push(fit_suite(&d, spec, designs, mis, &w, opts)?.with_t(t));
            train_data.push(d);
            train_weights.push(w);
        }
        Ok(FoldFits {
            plan,
            train_data,
            train_weights,
            suites,
        })
    }

    /// Suites with `u` and `v` fitted for `spec`.
    pub fn corner(
        &self,
        spec: EffectSpec,
        designs: &Designs,
        opts: &FitOptions,
    ) -> Result<Vec<NuisanceEstimates>> {
        self.suites
            .iter()
            .zip(&self.train_data)
            .map(|(s, d)| {
                let mut c = s.with_effect(spec);
                c.fit_corner(d, designs, opts)?;
                Ok(c)
            })
            .collect()
    }
}

fn count_clamp_hits(data: &Dataset, eta: &dyn NuisanceByRow) -> usize {
    data.rows
        .iter()
        .enumerate()
        .filter(|(i, o)| {
            let e = eta.for_row(*i);
            let ap = e.effect().a_prime;
            o.is_source() && o.a == ap && e.h(ap, o.z, &o.m, &o.w) >= H_MAX
        })
        .count()
}

/// One-step estimator: the plug-in mean of `v(a*, W)` over the target rows
/// plus the weighted mean of the remaining influence-function terms.
pub fn one_step(data: &Dataset, eta: &dyn NuisanceByRow, gamma: &[f64]) -> Result<CornerFit> {
    let at_zero = eif_sample(data, eta, 0.0, gamma)?;
    // With theta = 0 the last term is v(a*, W) / t on target rows.
    let theta = at_zero.mean;
    let at_theta = eif_sample(data, eta, theta, gamma)?;
    Ok(CornerFit {
        theta,
        ic: at_theta.weighted,
        diagnostics: Diagnostics {
            converged: true,
            clamp_hits: count_clamp_hits(data, eta),
            ..Diagnostics::default()
        },
    })
}

/// A suite whose `b`, `q`, `u` and `v` carry the TMLE fluctuations.
#[derive(Clone)]
pub struct Targeted<'a> {
    base: &'a NuisanceEstimates,
    weighted: bool,
    eps_b: f64,
    /// Fluctuation sizes for `q` and the `u` fit that defined each covariate.
    q_steps: Vec<(f64, Arc<FittedModel>)>,
    u: Arc<FittedModel>,
    v: Option<Arc<FittedModel>>,
    eps_v: f64,
}

fn u_point(model: &FittedModel, z: u8, a: u8, w: &[f64]) -> f64 {
    model.predict_point(&regress::Point {
        s: 0.0,
        a: f64::from(a),
        z: f64::from(z),
        w,
        m: &[],
    })
}

impl<'a> Targeted<'a> {
    pub fn new(base: &'a NuisanceEstimates, weighted: bool) -> Self {
        Targeted {
            base,
            weighted,
            eps_b: 0.0,
            q_steps: Vec::new(),
            u: Arc::clone(base.u.as_ref().expect("targeting needs an initial u fit")),
            v: None,
            eps_v: 0.0,
        }
    }

    /// Clever covariate for `b` (without the factors moved into the weights
    /// in the weighted variant).
    fn b_covariate(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        let b = self.base;
        let c = b.c(a, z, m, w);
        let odds = (1.0 - c) / c;
        if self.weighted {
            // q / r, with the clamp of `h` carried over so that covariate
            // times weight is exactly h / (g t).
            let ast = b.spec.a_star;
            odds * b.h(a, z, m, w) * b.g(ast, w) / b.g(a, w) * b.e(a, m, w) / b.e(ast, m, w)
        } else {
            odds * b.h(a, z, m, w) / (b.g(a, w) * b.t())
        }
    }

    /// Regression weight of an outcome row in the `b` fluctuation.
    fn b_weight(&self, gamma: f64, a: u8, m: &[f64], w: &[f64]) -> f64 {
        if self.weighted {
            let b = self.base;
            let ast = b.spec.a_star;
            gamma * b.e(ast, m, w) / b.e(a, m, w) / (b.g(ast, w) * b.t())
        } else {
            gamma
        }
    }

    fn b_logit(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        let base = logit(self.base.b(a, z, m, w));
        if self.eps_b == 0.0 {
            base
        } else {
            base + self.eps_b * self.b_covariate(a, z, m, w)
        }
    }

    fn q_covariate(&self, u: &FittedModel, w: &[f64]) -> f64 {
        let ap = self.base.spec.a_prime;
        let diff = u_point(u, 1, ap, w) - u_point(u, 0, ap, w);
        if self.weighted {
            diff
        } else {
            diff / (self.base.g(ap, w) * self.base.t())
        }
    }

    /// logit q(1 | a', w) after all `q` fluctuations so far.
    fn q1_logit(&self, w: &[f64]) -> f64 {
        let ap = self.base.spec.a_prime;
        let mut l = logit(self.base.q(1, ap, w));
        for (eps, u) in &self.q_steps {
            l += eps * self.q_covariate(u, w);
        }
        l
    }

    fn v_covariate(&self, a: u8, w: &[f64]) -> f64 {
        if self.weighted {
            1.0
        } else {
            1.0 / (self.base.g(a, w) * self.base.t())
        }
    }

    fn v_logit_initial(&self, a: u8, w: &[f64]) -> f64 {
        // Before the post-targeting refit the initial corner fit stands in.
        let v = self
            .v
            .as_ref()
            .or(self.base.v.as_ref())
            .expect("v requested before it was fitted");
        logit(clamp_prob(v.predict_point(&regress::Point {
            s: 0.0,
            a: f64::from(a),
            z: 0.0,
            w,
            m: &[],
        })))
    }
}

impl Nuisance for Targeted<'_> {
    fn effect(&self) -> EffectSpec {
        self.base.spec
    }
    fn t(&self) -> f64 {
        self.base.t
    }
    fn c(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        self.base.c(a, z, m, w)
    }
    fn g(&self, a: u8, w: &[f64]) -> f64 {
        self.base.g(a, w)
    }
    fn e(&self, a: u8, m: &[f64], w: &[f64]) -> f64 {
        self.base.e(a, m, w)
    }
    fn q(&self, z: u8, a: u8, w: &[f64]) -> f64 {
        if a != self.base.spec.a_prime || self.q_steps.is_empty() {
            return self.base.q(z, a, w);
        }
        let p1 = expit(self.q1_logit(w));
        if z == 1 {
            p1
        } else {
            1.0 - p1
        }
    }
    fn r(&self, z: u8, a: u8, m: &[f64], w: &[f64]) -> f64 {
        self.base.r(z, a, m, w)
    }
    fn b(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        if self.eps_b == 0.0 {
            return self.base.b(a, z, m, w);
        }
        expit(self.b_logit(a, z, m, w))
    }
    fn u(&self, z: u8, a: u8, w: &[f64]) -> f64 {
        u_point(&self.u, z, a, w)
    }
    fn v(&self, a: u8, w: &[f64]) -> f64 {
        expit(self.v_logit_initial(a, w) + self.eps_v * self.v_covariate(a, w))
    }
    fn h(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        self.base.h(a, z, m, w)
    }
}

/// Fits a single fluctuation coefficient: logistic regression of `y` on the
/// covariate `x` with no intercept and the given offsets.
fn fluctuation(x: Vec<f64>, y: &[f64], weights: &[f64], offset: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Ok(0.0);
    }
    // The score equations are certificates, so solve them to round-off.
    let opts = FitOptions {
        tol: 1e-13,
        ..FitOptions::default()
    };
    let m = regress::fit_binary_with(
        &DesignSpec::intercept(),
        &Matrix::column(&x),
        y,
        weights,
        Some(offset),
        &opts,
        None,
    )?;
    let mut eps = m.coefficients[0];
    // IRLS can stop on its deviance criterion with the score still visible,
    // so finish with Newton steps on the one-dimensional score itself.
    let score_at = |eps: f64| {
        let (mut s, mut info) = (0.0, 0.0);
        for i in 0..x.len() {
            let mu = expit(offset[i] + eps * x[i]);
            s += weights[i] * x[i] * (y[i] - mu);
            info += weights[i] * x[i] * x[i] * mu * (1.0 - mu);
        }
        (s, info)
    };
    for _ in 0..50 {
        let (s, info) = score_at(eps);
        if info <= 0.0 || !info.is_finite() {
            break;
        }
        let step = s / info;
        eps += step;
        if step.abs() <= 1e-15 * (1.0 + eps.abs()) {
            break;
        }
    }
    Ok(eps)
}

/// Everything the targeting steps need besides the data.
pub struct TmleInputs<'a> {
    pub suites: &'a [NuisanceEstimates],
    pub plan: &'a FoldPlan,
    pub train_data: &'a [Dataset],
    pub train_weights: &'a [Vec<f64>],
    pub designs: &'a Designs,
}

/// Targeted minimum loss-based estimator for one corner.
///
/// Alternates fluctuations of `b` (on `{s = 1, a = a'}`) and `q` (on
/// `{s = 0, a = a'}`), refitting `u` from the current `b` in between, until
/// `|n^-1 sum gamma (D_Y + D_Z)| <= 1 / (sqrt(n) log n)`. Then marginalises
/// `z` out of the targeted `b`, regresses onto `(a, w)` and fluctuates that
/// fit on `{s = 0, a = a*}`. The estimate is the weighted mean of the
/// targeted `v(a*, W)` over the target rows.
pub fn tmle(
    data: &Dataset,
    inputs: &TmleInputs,
    gamma: &[f64],
    opts: &EstimatorOptions,
) -> Result<CornerFit> {
    opts.validate()?;
    let n = data.len();
    let fold_of = &inputs.plan.fold_of;
    let spec = inputs.suites[0].spec;
    let (ap, ast) = (spec.a_prime, spec.a_star);
    let fit_opts = FitOptions::default();
    let score_bound = 1.0 / ((n as f64).sqrt() * (n as f64).ln());
    let weighted = opts.tmle_weighted_fluctuation;

    let mut tg: Vec<Targeted> = inputs
        .suites
        .iter()
        .map(|s| Targeted::new(s, weighted))
        .collect();

    let outcome_rows: Vec<usize> = (0..n)
        .filter(|&i| data.rows[i].is_source() && data.rows[i].a == ap)
        .collect();
    let z_rows: Vec<usize> = (0..n)
        .filter(|&i| data.rows[i].is_target() && data.rows[i].a == ap)
        .collect();

    let score = |tg: &[Targeted]| -> Result<f64> {
        let folded = Folded {
            suites: tg,
            fold_of,
        };
        let mut acc = 0.0;
        for (i, o) in data.rows.iter().enumerate() {
            if o.a != ap {
                continue;
            }
            let d = eif_row(o, folded.for_row(i), 0.0)?;
            acc += gamma[i] * (d.d_y + d.d_z);
        }
        Ok((acc / n as f64).abs())
    };

    let mut iterations = 0;
    let mut final_score = score(&tg)?;
    let mut converged = false;
    while iterations < opts.max_targeting_iters {
        iterations += 1;

        let (mut x, mut y, mut wts, mut off) = (vec![], vec![], vec![], vec![]);
        for &i in &outcome_rows {
            let o = &data.rows[i];
            let t = &tg[fold_of[i]];
            x.push(t.b_covariate(ap, o.z, &o.m, &o.w));
            y.push(o.y.ok_or(Error::MissingOutcome { row: i })?);
            wts.push(t.b_weight(gamma[i], ap, &o.m, &o.w));
            off.push(t.b_logit(ap, o.z, &o.m, &o.w));
        }
        let eps_b = fluctuation(x, &y, &wts, &off).map_err(|e| e.in_component("b"))?;
        for t in tg.iter_mut() {
            t.eps_b += eps_b;
        }

        for (j, t) in tg.iter_mut().enumerate() {
            let u = fit_u(
                &inputs.train_data[j],
                &*t,
                inputs.designs,
                &t.base.misspecified,
                &inputs.train_weights[j],
                &fit_opts,
            )?;
            t.u = Arc::new(u);
        }

        let (mut x, mut y, mut wts, mut off) = (vec![], vec![], vec![], vec![]);
        for &i in &z_rows {
            let o = &data.rows[i];
            let t = &tg[fold_of[i]];
            x.push(t.q_covariate(&t.u, &o.w));
            y.push(f64::from(o.z));
            wts.push(if weighted {
                gamma[i] / (t.base.g(ap, &o.w) * t.base.t)
            } else {
                gamma[i]
            });
            off.push(t.q1_logit(&o.w));
        }
        let eps_q = fluctuation(x, &y, &wts, &off).map_err(|e| e.in_component("q"))?;
        for t in tg.iter_mut() {
            let u = Arc::clone(&t.u);
            t.q_steps.push((eps_q, u));
        }

        final_score = score(&tg)?;
        if final_score <= score_bound {
            converged = true;
            break;
        }
    }

    for (j, t) in tg.iter_mut().enumerate() {
        let v = fit_v(
            &inputs.train_data[j],
            &*t,
            inputs.designs,
            &t.base.misspecified,
            &inputs.train_weights[j],
            &fit_opts,
        )?;
        t.v = Some(Arc::new(v));
    }
    let (mut x, mut y, mut wts, mut off) = (vec![], vec![], vec![], vec![]);
    for (i, o) in data.rows.iter().enumerate() {
        if !(o.is_target() && o.a == ast) {
            continue;
        }
        let t = &tg[fold_of[i]];
        x.push(t.v_covariate(ast, &o.w));
        y.push(marginalized_outcome(t, &o.m, &o.w));
        wts.push(if weighted {
            gamma[i] / (t.base.g(ast, &o.w) * t.base.t)
        } else {
            gamma[i]
        });
        off.push(t.v_logit_initial(ast, &o.w));
    }
    let eps_v = fluctuation(x, &y, &wts, &off).map_err(|e| e.in_component("v"))?;
    for t in tg.iter_mut() {
        t.eps_v = eps_v;
    }

    let t_share = inputs.suites[0].t;
    let theta = data
        .rows
        .iter()
        .enumerate()
        .filter(|(_, o)| o.is_target())
        .map(|(i, o)| gamma[i] * tg[fold_of[i]].v(ast, &o.w))
        .sum::<f64>()
        / (n as f64 * t_share);

    let folded = Folded {
        suites: &tg,
        fold_of,
    };
    let sample = eif_sample(data, &folded, theta, gamma)?;
    let mw_score = sample.component_mean(gamma, |c| c.d_m + c.d_w).abs();
    Ok(CornerFit {
        theta,
        ic: sample.weighted,
        diagnostics: Diagnostics {
            tmle_iterations: iterations,
            final_score,
            score_bound,
            mw_score,
            converged,
            clamp_hits: count_clamp_hits(data, &folded),
        },
    })
}

/// Runs the chosen estimator for `theta(a', a*)` alone.
pub fn estimate_theta(
    data: &Dataset,
    designs: &Designs,
    spec: EffectSpec,
    opts: &EstimatorOptions,
    gamma: &[f64],
) -> Result<Estimate> {
    let prepared = Prepared::new(data, gamma)?;
    let plan = FoldPlan::random(prepared.data.len(), opts.folds, opts.seed);
    let fits = FoldFits::fit(
        &prepared.data,
        designs,
        spec,
        &prepared.gamma,
        plan,
        &opts.misspecified,
        &opts.suite_options(),
    )?;
    let corner = run_corner(
        &prepared.data,
        &fits,
        spec,
        designs,
        opts,
        opts.estimator,
        &prepared.gamma,
    )?;
    Ok(corner.to_estimate(&prepared.scale))
}

/// Cross-fitted estimate of `theta(a', a*)`; requires `folds >= 2`.
pub fn cross_fit(
    data: &Dataset,
    designs: &Designs,
    spec: EffectSpec,
    opts: &EstimatorOptions,
    gamma: &[f64],
) -> Result<Estimate> {
    if opts.folds < 2 {
        return Err(Error::Config(
            "cross-fitting needs at least two folds".into(),
        ));
    }
    estimate_theta(data, designs, spec, opts, gamma)
}

/// Cross-fitted estimate with a caller-supplied fold assignment.
pub fn cross_fit_with_plan(
    data: &Dataset,
    designs: &Designs,
    spec: EffectSpec,
    opts: &EstimatorOptions,
    gamma: &[f64],
    plan: FoldPlan,
) -> Result<Estimate> {
    let prepared = Prepared::new(data, gamma)?;
    let fits = FoldFits::fit(
        &prepared.data,
        designs,
        spec,
        &prepared.gamma,
        plan,
        &opts.misspecified,
        &opts.suite_options(),
    )?;
    let corner = run_corner(
        &prepared.data,
        &fits,
        spec,
        designs,
        opts,
        opts.estimator,
        &prepared.gamma,
    )?;
    Ok(corner.to_estimate(&prepared.scale))
}

fn run_corner(
    data: &Dataset,
    fits: &FoldFits,
    spec: EffectSpec,
    designs: &Designs,
    opts: &EstimatorOptions,
    kind: EstimatorKind,
    gamma: &[f64],
) -> Result<CornerFit> {
    let suites = fits.corner(spec, designs, &FitOptions::default())?;
    run_estimator(data, fits, &suites, designs, opts, kind, gamma)
}

fn run_estimator(
    data: &Dataset,
    fits: &FoldFits,
    suites: &[NuisanceEstimates],
    designs: &Designs,
    opts: &EstimatorOptions,
    kind: EstimatorKind,
    gamma: &[f64],
) -> Result<CornerFit> {
    match kind {
        EstimatorKind::OneStep => {
            let folded = Folded {
                suites,
                fold_of: &fits.plan.fold_of,
            };
            one_step(data, &folded, gamma)
        }
        EstimatorKind::Tmle => tmle(
            data,
            &TmleInputs {
                suites,
                plan: &fits.plan,
                train_data: &fits.train_data,
                train_weights: &fits.train_weights,
                designs,
            },
            gamma,
            opts,
        ),
    }
}

/// Selected rows on the unit outcome scale with their weights.
struct Prepared {
    data: Dataset,
    gamma: Vec<f64>,
    scale: OutcomeScale,
}

impl Prepared {
    fn new(data: &Dataset, gamma: &[f64]) -> Result<Self> {
        if gamma.len() != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} rows",
                gamma.len(),
                data.len()
            )));
        }
        validate_ref(data)?;
        let keep: Vec<usize> = (0..data.len())
            .filter(|&i| data.rows[i].delta == 1)
            .collect();
        let selected = data.subset(&keep);
        let gamma: Vec<f64> = keep.iter().map(|&i| gamma[i]).collect();
        let (unit, scale) = scale_outcome(&selected)?;
        Ok(Prepared {
            data: unit,
            gamma,
            scale,
        })
    }
}

/// Direct and indirect effects for the pair `(a', a*)`.
pub fn estimate_effects(
    data: &Dataset,
    designs: &Designs,
    spec: EffectSpec,
    opts: &EstimatorOptions,
    gamma: &[f64],
) -> Result<EffectEstimates> {
    let mut out = estimate_effects_multi(data, designs, spec, opts, gamma, &[opts.estimator])?;
    Ok(out.remove(0))
}

/// Like [`estimate_effects`] for several estimators at once, sharing the
/// nuisance fits between them.
pub fn estimate_effects_multi(
    data: &Dataset,
    designs: &Designs,
    spec: EffectSpec,
    opts: &EstimatorOptions,
    gamma: &[f64],
    kinds: &[EstimatorKind],
) -> Result<Vec<EffectEstimates>> {
    opts.validate()?;
    let prepared = Prepared::new(data, gamma)?;
    let (data, gamma, scale) = (&prepared.data, &prepared.gamma, &prepared.scale);
    let plan = FoldPlan::random(data.len(), opts.folds, opts.seed);
    let fits = FoldFits::fit(
        data,
        designs,
        spec,
        gamma,
        plan,
        &opts.misspecified,
        &opts.suite_options(),
    )?;

    let corners = [
        EffectSpec::new(spec.a_prime, spec.a_prime)?,
        spec,
        EffectSpec::new(spec.a_star, spec.a_star)?,
    ];
    // results[corner][kind]
    let mut results: Vec<(EffectSpec, Vec<CornerFit>)> = Vec::new();
    for c in corners {
        if results.iter().any(|(s, _)| *s == c) {
            continue;
        }
        let suites = fits.corner(c, designs, &FitOptions::default())?;
        let per_kind = kinds
            .iter()
            .map(|&k| run_estimator(data, &fits, &suites, designs, opts, k, gamma))
            .collect::<Result<Vec<_>>>()?;
        results.push((c, per_kind));
    }
    let lookup = |c: EffectSpec, k: usize| -> &CornerFit {
        &results
            .iter()
            .find(|(s, _)| *s == c)
            .expect("corner fitted")
            .1[k]
    };

    Ok((0..kinds.len())
        .map(|k| {
            let pp = lookup(corners[0], k);
            let ps = lookup(corners[1], k);
            let ss = lookup(corners[2], k);
            EffectEstimates {
                theta_pp: pp.to_estimate(scale),
                theta_ps: ps.to_estimate(scale),
                theta_ss: ss.to_estimate(scale),
                sde: contrast(ps, ss, scale),
                sie: contrast(pp, ps, scale),
            }
        })
        .collect())
}
