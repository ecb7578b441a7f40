//! Exact truths for the simulation mechanism by summation over its finite
//! support.
//!
//! Two target populations are available: the whole population
//! ([`Population::Full`], what survey-weighted estimators recover) and the
//! sampled sub-population with `Delta = 1` ([`Population::Sampled`], what
//! unweighted estimators recover). Since `Delta` depends on `W` alone, every
//! conditional given `W` is shared; only the covariate law differs.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EffectSpec, Observation};
use crate::eif::eif_row;
use crate::error::Result;
use crate::nuisance::{
    fit_suite, Component, Designs, MisspecSet, Nuisance, NuisanceEstimates, SuiteOptions,
};
use crate::regress::{DesignSpec, FitOptions, Link, Term};

use super::dgm::DgmParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    Full,
    Sampled,
}

impl Population {
    pub fn label(self) -> &'static str {
        match self {
            Population::Full => "full",
            Population::Sampled => "sampled",
        }
    }
}

const W_SUPPORT: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

fn bit(x: f64) -> u8 {
    u8::from(x > 0.5)
}

/// Covariate mass in `pop`, unnormalised for `Sampled`.
fn w_mass(p: &DgmParams, pop: Population, w1: u8, w2: u8) -> f64 {
    let base = p.pr_w(w1, w2);
    match pop {
        Population::Full => base,
        Population::Sampled => base * p.pi(w1, w2),
    }
}

/// P(Delta = 1).
pub fn p_selected(p: &DgmParams) -> f64 {
    W_SUPPORT
        .iter()
        .map(|&(w1, w2)| w_mass(p, Population::Sampled, w1, w2))
        .sum()
}

/// The true nuisance functions, in the form the estimators consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleNuisance {
    pub params: DgmParams,
    pub population: Population,
    pub spec: EffectSpec,
}

impl OracleNuisance {
    pub fn new(params: DgmParams, population: Population, spec: EffectSpec) -> Self {
        OracleNuisance {
            params,
            population,
            spec,
        }
    }

    /// p(m | a, w, s = 0).
    fn p_m(&self, m: u8, a: u8, w2: u8) -> f64 {
        let p = &self.params;
        (0..2u8)
            .map(|z| p.pr_z(z, a, 0, w2) * p.pr_m(m, z, 0, w2))
            .sum()
    }
}

impl Nuisance for OracleNuisance {
    fn effect(&self) -> EffectSpec {
        self.spec
    }

    fn t(&self) -> f64 {
        let p = &self.params;
        let (num, den) = W_SUPPORT.iter().fold((0.0, 0.0), |(n, d), &(w1, w2)| {
            let mass = w_mass(p, self.population, w1, w2);
            (n + mass * p.pr_s(0, w1, w2), d + mass)
        });
        num / den
    }

    fn c(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        let p = &self.params;
        let (w1, w2, m) = (bit(w[0]), bit(w[1]), bit(m[0]));
        let joint = |s: u8| p.pr_s(s, w1, w2) * p.pr_z(z, a, s, w2) * p.pr_m(m, z, s, w2);
        joint(1) / (joint(0) + joint(1))
    }

    fn g(&self, a: u8, _: &[f64]) -> f64 {
        self.params.pr_a(a)
    }

    fn e(&self, a: u8, m: &[f64], w: &[f64]) -> f64 {
        let (w2, m) = (bit(w[1]), bit(m[0]));
        let joint = |x: u8| self.params.pr_a(x) * self.p_m(m, x, w2);
        joint(a) / (joint(0) + joint(1))
    }

    fn q(&self, z: u8, a: u8, w: &[f64]) -> f64 {
        self.params.pr_z(z, a, 0, bit(w[1]))
    }

    fn r(&self, z: u8, a: u8, m: &[f64], w: &[f64]) -> f64 {
        let p = &self.params;
        let (w2, m) = (bit(w[1]), bit(m[0]));
        p.pr_z(z, a, 0, w2) * p.pr_m(m, z, 0, w2) / self.p_m(m, a, w2)
    }

    fn b(&self, _: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        self.params.mean_y(z, bit(m[0]), bit(w[1]))
    }

    fn u(&self, z: u8, a: u8, w: &[f64]) -> f64 {
        let ast = self.spec.a_star;
        (0..2u8)
            .map(|m| self.b(a, z, &[f64::from(m)], w) * self.p_m(m, ast, bit(w[1])))
            .sum()
    }

    fn v(&self, a: u8, w: &[f64]) -> f64 {
        let ap = self.spec.a_prime;
        let mut acc = 0.0;
        for z in 0..2u8 {
            for m in 0..2u8 {
                acc += self.b(ap, z, &[f64::from(m)], w)
                    * self.q(z, ap, w)
                    * self.p_m(m, a, bit(w[1]));
            }
        }
        acc
    }
}

/// `theta(a', a*)` in `pop`: the mean of `v(a*, W)` over the target
/// population's covariate law.
pub fn theta(params: &DgmParams, pop: Population, spec: EffectSpec) -> f64 {
    let eta = OracleNuisance::new(*params, pop, spec);
    let (num, den) = W_SUPPORT.iter().fold((0.0, 0.0), |(n, d), &(w1, w2)| {
        let mass = w_mass(params, pop, w1, w2) * params.pr_s(0, w1, w2);
        let w = [f64::from(w1), f64::from(w2)];
        (n + mass * eta.v(spec.a_star, &w), d + mass)
    });
    num / den
}

/// One point of the observed-data support with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub obs: Observation,
    pub prob: f64,
}

/// Every observable cell in `pop`. Target rows carry no outcome, so their
/// cells marginalise over `Y`.
pub fn cells(params: &DgmParams, pop: Population) -> Vec<Cell> {
    let p = params;
    let total: f64 = W_SUPPORT.iter().map(|&(a, b)| w_mass(p, pop, a, b)).sum();
    let mut out = Vec::new();
    for &(w1, w2) in &W_SUPPORT {
        let pw = w_mass(p, pop, w1, w2) / total;
        for s in 0..2u8 {
            for a in 0..2u8 {
                for z in 0..2u8 {
                    for m in 0..2u8 {
                        let prob = pw
                            * p.pr_s(s, w1, w2)
                            * p.pr_a(a)
                            * p.pr_z(z, a, s, w2)
                            * p.pr_m(m, z, s, w2);
                        let obs = |y: Option<f64>| Observation {
                            delta: 1,
                            s,
                            w: vec![f64::from(w1), f64::from(w2)],
                            a,
                            z,
                            m: vec![f64::from(m)],
                            y,
                            pi: Some(p.pi(w1, w2)),
                        };
                        if s == 0 {
                            out.push(Cell {
                                obs: obs(None),
                                prob,
                            });
                        } else {
                            let ey = p.mean_y(z, m, w2);
                            out.push(Cell {
                                obs: obs(Some(1.0)),
                                prob: prob * ey,
                            });
                            out.push(Cell {
                                obs: obs(Some(0.0)),
                                prob: prob * (1.0 - ey),
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// The enumerated distribution as a weighted dataset: cell `i` becomes one
/// row with weight `gamma_i = N * prob_i`, so `n^-1 sum gamma_i f(O_i)` is
/// the exact population mean of `f`.
pub fn pseudo_data(params: &DgmParams, pop: Population) -> (Dataset, Vec<f64>) {
    let cells = cells(params, pop);
    let n = cells.len() as f64;
    let gamma = cells.iter().map(|c| n * c.prob).collect();
    let rows = cells.into_iter().map(|c| c.obs).collect();
    (Dataset::new(rows, (0.0, 1.0)), gamma)
}

/// Population mean of the influence function under `eta` at `theta`.
pub fn population_eif_mean(cells: &[Cell], eta: &dyn Nuisance, theta: f64) -> Result<f64> {
    let mut acc = 0.0;
    for c in cells {
        acc += c.prob * eif_row(&c.obs, eta, theta)?.total;
    }
    Ok(acc)
}

/// Exact truths for one population and effect pair `(a', a*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleTruths {
    pub population: Population,
    pub a_prime: u8,
    pub a_star: u8,
    /// theta(a', a')
    pub theta_pp: f64,
    /// theta(a', a*)
    pub theta_ps: f64,
    /// theta(a*, a*)
    pub theta_ss: f64,
    pub sde: f64,
    pub sie: f64,
    /// Asymptotic variances per unit drawn before selection, i.e. for
    /// `sqrt(N) (estimate - truth)` with `N` the number of draws.
    pub sigma2_pp: f64,
    pub sigma2_ps: f64,
    pub sigma2_ss: f64,
    pub sigma2_sde: f64,
    pub sigma2_sie: f64,
    /// P(Delta = 1).
    pub p_selected: f64,
}

/// Truths for the full population and the default pair `(1, 0)`.
pub fn oracle(params: &DgmParams) -> OracleTruths {
    oracle_for(
        params,
        Population::Full,
        EffectSpec {
            a_prime: 1,
            a_star: 0,
        },
    )
}

pub fn oracle_for(params: &DgmParams, pop: Population, spec: EffectSpec) -> OracleTruths {
    let corners = [
        EffectSpec {
            a_prime: spec.a_prime,
            a_star: spec.a_prime,
        },
        spec,
        EffectSpec {
            a_prime: spec.a_star,
            a_star: spec.a_star,
        },
    ];
    let thetas = corners.map(|c| theta(params, pop, c));
    let cells = cells(params, pop);
    let p_sel = p_selected(params);

    // Per-cell influence values of the three corners.
    let d: Vec<[f64; 3]> = cells
        .iter()
        .map(|c| {
            let mut out = [0.0; 3];
            for k in 0..3 {
                let eta = OracleNuisance::new(*params, pop, corners[k]);
                out[k] = eif_row(&c.obs, &eta, thetas[k])
                    .expect("enumerated cells are complete")
                    .total;
            }
            out
        })
        .collect();

    // Full population: the survey-weighted estimator has influence
    // D / Pi per selected unit. Sampled: D per selected unit, which is a
    // fraction P(Delta = 1) of all draws.
    let sigma2 = |f: &dyn Fn(&[f64; 3]) -> f64| -> f64 {
        cells
            .iter()
            .zip(&d)
            .map(|(c, dk)| {
                let x = f(dk);
                match pop {
                    Population::Full => c.prob * x * x / c.obs.pi.unwrap(),
                    Population::Sampled => c.prob * x * x / p_sel,
                }
            })
            .sum()
    };

    OracleTruths {
        population: pop,
        a_prime: spec.a_prime,
        a_star: spec.a_star,
        theta_pp: thetas[0],
        theta_ps: thetas[1],
        theta_ss: thetas[2],
        sde: thetas[1] - thetas[2],
        sie: thetas[0] - thetas[1],
        sigma2_pp: sigma2(&|x| x[0]),
        sigma2_ps: sigma2(&|x| x[1]),
        sigma2_ss: sigma2(&|x| x[2]),
        sigma2_sde: sigma2(&|x| x[1] - x[2]),
        sigma2_sie: sigma2(&|x| x[0] - x[1]),
        p_selected: p_sel,
    }
}

/// Designs that contain the true regression for every component of this
/// mechanism. `c`, `e` and `r` are Bayes inversions of logistic models and
/// are not themselves main-effects logistic, so they use full-factorial
/// designs (exact on binary data).
pub fn correct_designs() -> Designs {
    let (w1, w2, m) = (Term::W(0), Term::W(1), Term::M(0));
    Designs {
        b: DesignSpec::new(vec![w1, w2, Term::A, Term::Z, m], vec![vec![w2, Term::Z]]),
        c: DesignSpec::saturated(&[Term::A, Term::Z, m, w1, w2]),
        g: DesignSpec::new(vec![Term::S, w1, w2], vec![]),
        q: DesignSpec::new(vec![Term::S, Term::A, w1, w2], vec![vec![Term::A, Term::S]]),
        r: DesignSpec::saturated(&[Term::S, Term::A, m, w1, w2]),
        e: DesignSpec::saturated(&[Term::S, m, w1, w2]),
        u: DesignSpec::saturated(&[Term::S, Term::A, Term::Z, w1, w2]),
        v: DesignSpec::saturated(&[Term::A, w1, w2]),
        u_link: Link::Identity,
        v_link: Link::Identity,
    }
}

/// Population limit of the fitted suite when the components in `mis` are
/// intercept-only: the fits on the enumerated distribution.
pub fn limit_suite(
    params: &DgmParams,
    pop: Population,
    spec: EffectSpec,
    mis: &MisspecSet,
) -> Result<NuisanceEstimates> {
    let (data, gamma) = pseudo_data(params, pop);
    let designs = correct_designs();
    let mut suite = fit_suite(&data, spec, &designs, mis, &gamma, &SuiteOptions::default())?;
    suite.fit_corner(&data, &designs, &FitOptions::default())?;
    Ok(suite)
}

/// Population limit with every component intercept-only.
pub fn intercept_only_limit(
    params: &DgmParams,
    pop: Population,
    spec: EffectSpec,
) -> Result<NuisanceEstimates> {
    limit_suite(params, pop, spec, &MisspecSet::of(&Component::ALL))
}
