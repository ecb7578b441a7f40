//! The nuisance suite `(c, g, e, q, r, b, u, v)` and the target-population
//! share `t`.
//!
//! Conventions (all conditionals are in the target population `s = 0`
//! unless stated):
//!
//! * `c(a, z, m, w)`: P(S = 1 | a, z, m, w)
//! * `g(a | w)`: P(A = a | w)
//! * `e(a | m, w)`: P(A = a | m, w)
//! * `q(z | a, w)`: P(Z = z | a, w)
//! * `r(z | a, m, w)`: P(Z = z | a, m, w)
//! * `b(a, z, m, w)`: E(Y | a, z, m, w, S = 1)
//! * `u(z, a, w)`, `v(a, w)`: sequential regressions that integrate the
//!   mediator out without estimating its density.
//!
//! The mediator density ratio `h` is never estimated directly; it is the
//! product of three probability ratios built from `g`, `q`, `r` and `e`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EffectSpec, Observation};
use crate::error::{Error, Result};
use crate::regress::{
    self, clamp_prob, DesignSpec, FitOptions, FittedModel, Link, Matrix, Point, Term,
};

/// Upper clamp on the mediator density ratio `h`.
pub const H_MAX: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    C,
    G,
    E,
    Q,
    R,
    B,
    U,
    V,
}

impl Component {
    pub const ALL: [Component; 8] = [
        Component::C,
        Component::G,
        Component::E,
        Component::Q,
        Component::R,
        Component::B,
        Component::U,
        Component::V,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::C => "c",
            Component::G => "g",
            Component::E => "e",
            Component::Q => "q",
            Component::R => "r",
            Component::B => "b",
            Component::U => "u",
            Component::V => "v",
        }
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown nuisance component `{s}`")))
    }
}

/// Components replaced by intercept-only fits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MisspecSet(BTreeSet<Component>);

impl MisspecSet {
    pub fn none() -> Self {
        MisspecSet::default()
    }

    pub fn of(items: &[Component]) -> Self {
        MisspecSet(items.iter().copied().collect())
    }

    pub fn contains(&self, c: Component) -> bool {
        self.0.contains(&c)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Component> + '_ {
        self.0.iter().copied()
    }

    /// Every component not in `self`.
    pub fn complement(&self) -> Self {
        MisspecSet(
            Component::ALL
                .into_iter()
                .filter(|c| !self.contains(*c))
                .collect(),
        )
    }
}

impl fmt::Display for MisspecSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("none");
        }
        let names: Vec<_> = self.iter().map(Component::name).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for MisspecSet {
    type Err = Error;

    /// Parses `"none"`, `""` or a comma-separated list such as `"c,e,r"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("none") {
            return Ok(MisspecSet::none());
        }
        s.split(',')
            .map(str::parse)
            .collect::<Result<BTreeSet<_>>>()
            .map(MisspecSet)
    }
}

/// Read access to a nuisance suite at arbitrary evaluation points.
pub trait Nuisance: Send + Sync {
    /// The `(a', a*)` pair that `h`, `u` and `v` are defined for.
    fn effect(&self) -> EffectSpec;
    fn t(&self) -> f64;
    fn c(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64;
    fn g(&self, a: u8, w: &[f64]) -> f64;
    fn e(&self, a: u8, m: &[f64], w: &[f64]) -> f64;
    fn q(&self, z: u8, a: u8, w: &[f64]) -> f64;
    fn r(&self, z: u8, a: u8, m: &[f64], w: &[f64]) -> f64;
    fn b(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64;
    fn u(&self, z: u8, a: u8, w: &[f64]) -> f64;
    fn v(&self, a: u8, w: &[f64]) -> f64;

    /// Mediator density ratio p(m | a*, w) / p(m | a, z, w), clamped to
    /// `[0, H_MAX]`.
    fn h(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        let a_star = self.effect().a_star;
        let ratio = self.g(a, w) / self.g(a_star, w) * self.q(z, a, w) / self.r(z, a, m, w)
            * self.e(a_star, m, w)
            / self.e(a, m, w);
        ratio.clamp(0.0, H_MAX)
    }
}

/// Free-function form of [`Nuisance::h`].
pub fn compute_h(eta: &dyn Nuisance, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
    eta.h(a, z, m, w)
}

/// Regression designs for each component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Designs {
    pub b: DesignSpec,
    pub c: DesignSpec,
    pub g: DesignSpec,
    pub q: DesignSpec,
    pub r: DesignSpec,
    pub e: DesignSpec,
    pub u: DesignSpec,
    pub v: DesignSpec,
    pub u_link: Link,
    pub v_link: Link,
}

fn ws(p: usize) -> impl Iterator<Item = Term> {
    (0..p).map(Term::W)
}

fn ms(q: usize) -> impl Iterator<Item = Term> {
    (0..q).map(Term::M)
}

impl Designs {
    fn build(p: usize, q: usize, make: impl Fn(Vec<Term>) -> DesignSpec) -> Self {
        let cat = |head: &[Term], m: bool| -> Vec<Term> {
            let mut v = head.to_vec();
            v.extend(ws(p));
            if m {
                v.extend(ms(q));
            }
            v
        };
        Designs {
            b: make(cat(&[Term::A, Term::Z], true)),
            c: make(cat(&[Term::A, Term::Z], true)),
            g: make(cat(&[Term::S], false)),
            q: make(cat(&[Term::S, Term::A], false)),
            r: make(cat(&[Term::S, Term::A], true)),
            e: make(cat(&[Term::S], true)),
            u: make(cat(&[Term::S, Term::A, Term::Z], false)),
            v: make(cat(&[Term::A], false)),
            u_link: Link::Identity,
            v_link: Link::Identity,
        }
    }

    /// Main-effects designs for `p` covariates and `q` mediators.
    pub fn main_effects(p: usize, q: usize) -> Self {
        Designs::build(p, q, |t| DesignSpec::new(t, vec![]))
    }

    /// Full-factorial designs; exact whenever all predictors are binary.
    pub fn saturated(p: usize, q: usize) -> Self {
        Designs::build(p, q, |t| DesignSpec::saturated(&t))
    }

    pub fn component(&self, c: Component) -> &DesignSpec {
        match c {
            Component::B => &self.b,
            Component::C => &self.c,
            Component::G => &self.g,
            Component::Q => &self.q,
            Component::R => &self.r,
            Component::E => &self.e,
            Component::U => &self.u,
            Component::V => &self.v,
        }
    }

    /// Checks dimensions and that each design only uses predictors its
    /// regression conditions on.
    pub fn validate(&self, p: usize, q: usize) -> Result<()> {
        for comp in Component::ALL {
            let d = self.component(comp);
            d.validate(p, q)?;
            let allowed = |t: &Term| -> bool {
                matches!(
                    (comp, t),
                    (
                        Component::B | Component::C,
                        Term::A | Term::Z | Term::W(_) | Term::M(_)
                    ) | (Component::G, Term::S | Term::W(_))
                        | (Component::Q, Term::S | Term::A | Term::W(_))
                        | (Component::R, Term::S | Term::A | Term::W(_) | Term::M(_))
                        | (Component::E, Term::S | Term::W(_) | Term::M(_))
                        | (Component::U, Term::S | Term::A | Term::Z | Term::W(_))
                        | (Component::V, Term::A | Term::W(_))
                )
            };
            if d.uses(|t| !allowed(t)) {
                return Err(Error::Config(format!(
                    "design for `{}` uses a predictor outside its conditioning set",
                    comp.name()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SuiteOptions {
    /// Estimate `g` as the weighted treatment proportion among `s = 0`.
    pub g_empirical: bool,
    pub fit: FitOptions,
}

/// Fitted nuisance suite.
#[derive(Debug, Clone)]
pub struct NuisanceEstimates {
    pub spec: EffectSpec,
    pub t: f64,
    pub b: Arc<FittedModel>,
    pub c: Arc<FittedModel>,
    pub g: Arc<FittedModel>,
    pub q: Arc<FittedModel>,
    pub r: Arc<FittedModel>,
    pub e: Arc<FittedModel>,
    pub u: Option<Arc<FittedModel>>,
    pub v: Option<Arc<FittedModel>>,
    /// P(A = 1 | S = 0) when `g` is estimated empirically.
    pub g_empirical: Option<f64>,
    pub misspecified: MisspecSet,
    pub weights_used: Arc<Vec<f64>>,
}

fn pt<'a>(s: u8, a: u8, z: u8, m: &'a [f64], w: &'a [f64]) -> Point<'a> {
    Point {
        s: f64::from(s),
        a: f64::from(a),
        z: f64::from(z),
        w,
        m,
    }
}

fn row_pt(o: &Observation) -> Point<'_> {
    pt(o.s, o.a, o.z, &o.m, &o.w)
}

fn choose(p1: f64, level: u8) -> f64 {
    if level == 1 {
        p1
    } else {
        1.0 - p1
    }
}

fn design_for(d: &DesignSpec, comp: Component, mis: &MisspecSet) -> DesignSpec {
    if mis.contains(comp) {
        d.as_intercept_only()
    } else {
        d.clone()
    }
}

fn fit_component(
    comp: Component,
    design: &DesignSpec,
    link: Link,
    points: Vec<Point>,
    y: &[f64],
    weights: &[f64],
    opts: &FitOptions,
) -> Result<FittedModel> {
    let x: Matrix = design.matrix(points);
    let fit = match link {
        Link::Logit => regress::fit_binary_with(design, &x, y, weights, None, opts, None),
        Link::Identity => regress::fit_linear_with(design, &x, y, weights, opts),
    };
    fit.map_err(|e| e.in_component(comp.name()))
}

/// Weighted share of target-population rows, `n^-1 sum weight_i (1 - s_i)`.
pub fn target_share(data: &Dataset, weights: &[f64]) -> f64 {
    let n = data.len() as f64;
    data.rows
        .iter()
        .zip(weights)
        .filter(|(r, _)| r.is_target())
        .map(|(_, w)| w)
        .sum::<f64>()
        / n
}

/// Fits `t, b, c, g, q, r, e`. `u` and `v` depend on the effect corner and
/// are added by [`fit_u`] / [`fit_v`] (or [`NuisanceEstimates::fit_corner`]).
pub fn fit_suite(
    data: &Dataset,
    spec: EffectSpec,
    designs: &Designs,
    mis: &MisspecSet,
    fit_weights: &[f64],
    opts: &SuiteOptions,
) -> Result<NuisanceEstimates> {
    if fit_weights.len() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} fit weights for {} rows",
            fit_weights.len(),
            data.len()
        )));
    }
    designs.validate(data.p(), data.q())?;
    let rows = &data.rows;
    let fo = &opts.fit;
    let t = target_share(data, fit_weights);
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::EmptyArm {
            s: if t > 0.0 { 1 } else { 0 },
        });
    }

    let src: Vec<&Observation> = rows.iter().filter(|r| r.is_source()).collect();
    let src_w: Vec<f64> = rows
        .iter()
        .zip(fit_weights)
        .filter(|(r, _)| r.is_source())
        .map(|(_, w)| *w)
        .collect();
    let src_y = src
        .iter()
        .enumerate()
        .map(|(i, r)| r.y.ok_or(Error::MissingOutcome { row: i }))
        .collect::<Result<Vec<f64>>>()?;
    let b = fit_component(
        Component::B,
        &design_for(&designs.b, Component::B, mis),
        Link::Logit,
        src.iter().map(|r| row_pt(r)).collect(),
        &src_y,
        &src_w,
        fo,
    )?;

    let all_pts = || rows.iter().map(row_pt).collect::<Vec<_>>();
    let s_y: Vec<f64> = rows.iter().map(|r| f64::from(r.s)).collect();
    let a_y: Vec<f64> = rows.iter().map(|r| f64::from(r.a)).collect();
    let z_y: Vec<f64> = rows.iter().map(|r| f64::from(r.z)).collect();

    let fit_all = |comp: Component, d: &DesignSpec, y: &[f64]| {
        fit_component(
            comp,
            &design_for(d, comp, mis),
            Link::Logit,
            all_pts(),
            y,
            fit_weights,
            fo,
        )
    };
    let c = fit_all(Component::C, &designs.c, &s_y)?;
    let g = fit_all(Component::G, &designs.g, &a_y)?;
    let q = fit_all(Component::Q, &designs.q, &z_y)?;
    let r = fit_all(Component::R, &designs.r, &z_y)?;
    let e = fit_all(Component::E, &designs.e, &a_y)?;

    let g_empirical = (opts.g_empirical && !mis.contains(Component::G)).then(|| {
        let (num, den) = rows
            .iter()
            .zip(fit_weights)
            .filter(|(r, _)| r.is_target())
            .fold((0.0, 0.0), |(n, d), (r, w)| (n + w * f64::from(r.a), d + w));
        clamp_prob(num / den)
    });

    Ok(NuisanceEstimates {
        spec,
        t,
        b: Arc::new(b),
        c: Arc::new(c),
        g: Arc::new(g),
        q: Arc::new(q),
        r: Arc::new(r),
        e: Arc::new(e),
        u: None,
        v: None,
        g_empirical,
        misspecified: mis.clone(),
        weights_used: Arc::new(fit_weights.to_vec()),
    })
}

/// Regresses the pseudo-outcome `b(A,Z,M,W) h(A,Z,M,W)` on `(s, a, z, w)`
/// over all rows; predictions at `(s = 0, a', z, w)` give `u(z, a', w)`.
pub fn fit_u(
    data: &Dataset,
    eta: &dyn Nuisance,
    designs: &Designs,
    mis: &MisspecSet,
    fit_weights: &[f64],
    opts: &FitOptions,
) -> Result<FittedModel> {
    let pseudo: Vec<f64> = data
        .rows
        .iter()
        .map(|o| eta.b(o.a, o.z, &o.m, &o.w) * eta.h(o.a, o.z, &o.m, &o.w))
        .collect();
    fit_component(
        Component::U,
        &design_for(&designs.u, Component::U, mis),
        designs.u_link,
        data.rows.iter().map(row_pt).collect(),
        &pseudo,
        fit_weights,
        opts,
    )
}

/// `Q_i = sum_z b(a', z, M_i, W_i) q(z | a', W_i)`.
pub fn marginalized_outcome(eta: &dyn Nuisance, m: &[f64], w: &[f64]) -> f64 {
    let ap = eta.effect().a_prime;
    (0..2u8).map(|z| eta.b(ap, z, m, w) * eta.q(z, ap, w)).sum()
}

/// Regresses `Q` on `(a, w)` among target rows; predictions at `a*` give
/// `v(a*, w)`.
pub fn fit_v(
    data: &Dataset,
    eta: &dyn Nuisance,
    designs: &Designs,
    mis: &MisspecSet,
    fit_weights: &[f64],
    opts: &FitOptions,
) -> Result<FittedModel> {
    let (pts, (qs, ws)): (Vec<_>, (Vec<_>, Vec<_>)) = data
        .rows
        .iter()
        .zip(fit_weights)
        .filter(|(o, _)| o.is_target())
        .map(|(o, w)| (row_pt(o), (marginalized_outcome(eta, &o.m, &o.w), *w)))
        .unzip();
    fit_component(
        Component::V,
        &design_for(&designs.v, Component::V, mis),
        designs.v_link,
        pts,
        &qs,
        &ws,
        opts,
    )
}

impl NuisanceEstimates {
    /// Same base fits re-targeted at another `(a', a*)`; `u` and `v` are
    /// dropped because they depend on the corner.
    pub fn with_effect(&self, spec: EffectSpec) -> Self {
        NuisanceEstimates {
            spec,
            u: None,
            v: None,
            ..self.clone()
        }
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn fit_u(&mut self, data: &Dataset, designs: &Designs, opts: &FitOptions) -> Result<()> {
        let w = Arc::clone(&self.weights_used);
        let u = fit_u(data, &*self, designs, &self.misspecified, &w, opts)?;
        self.u = Some(Arc::new(u));
        Ok(())
    }

    pub fn fit_v(&mut self, data: &Dataset, designs: &Designs, opts: &FitOptions) -> Result<()> {
        let w = Arc::clone(&self.weights_used);
        let v = fit_v(data, &*self, designs, &self.misspecified, &w, opts)?;
        self.v = Some(Arc::new(v));
        Ok(())
    }

    /// Fits both corner-specific regressions.
    pub fn fit_corner(
        &mut self,
        data: &Dataset,
        designs: &Designs,
        opts: &FitOptions,
    ) -> Result<()> {
        self.fit_u(data, designs, opts)?;
        self.fit_v(data, designs, opts)
    }
}

impl Nuisance for NuisanceEstimates {
    fn effect(&self) -> EffectSpec {
        self.spec
    }

    fn t(&self) -> f64 {
        self.t
    }

    fn c(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        self.c.predict_point(&pt(0, a, z, m, w))
    }

    fn g(&self, a: u8, w: &[f64]) -> f64 {
        let p1 = match self.g_empirical {
            Some(p) => p,
            None => self.g.predict_point(&pt(0, 0, 0, &[], w)),
        };
        choose(p1, a)
    }

    fn e(&self, a: u8, m: &[f64], w: &[f64]) -> f64 {
        choose(self.e.predict_point(&pt(0, 0, 0, m, w)), a)
    }

    fn q(&self, z: u8, a: u8, w: &[f64]) -> f64 {
        choose(self.q.predict_point(&pt(0, a, 0, &[], w)), z)
    }

    fn r(&self, z: u8, a: u8, m: &[f64], w: &[f64]) -> f64 {
        choose(self.r.predict_point(&pt(0, a, 0, m, w)), z)
    }

    fn b(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        self.b.predict_point(&pt(1, a, z, m, w))
    }

    fn u(&self, z: u8, a: u8, w: &[f64]) -> f64 {
        self.u
            .as_ref()
            .expect("u requested before fit_u")
            .predict_point(&pt(0, a, z, &[], w))
    }

    fn v(&self, a: u8, w: &[f64]) -> f64 {
        self.v
            .as_ref()
            .expect("v requested before fit_v")
            .predict_point(&pt(0, a, 0, &[], w))
    }
}

/// Takes the components named in `swap` from `alternative` and everything
/// else (including `t`) from `primary`.
pub struct Overlay<'a> {
    pub primary: &'a dyn Nuisance,
    pub alternative: &'a dyn Nuisance,
    pub swap: MisspecSet,
}

impl Overlay<'_> {
    fn pick(&self, c: Component) -> &dyn Nuisance {
        if self.swap.contains(c) {
            self.alternative
        } else {
            self.primary
        }
    }
}

impl Nuisance for Overlay<'_> {
    fn effect(&self) -> EffectSpec {
        self.primary.effect()
    }
    fn t(&self) -> f64 {
        self.primary.t()
    }
    fn c(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        self.pick(Component::C).c(a, z, m, w)
    }
    fn g(&self, a: u8, w: &[f64]) -> f64 {
        self.pick(Component::G).g(a, w)
    }
    fn e(&self, a: u8, m: &[f64], w: &[f64]) -> f64 {
        self.pick(Component::E).e(a, m, w)
    }
    fn q(&self, z: u8, a: u8, w: &[f64]) -> f64 {
        self.pick(Component::Q).q(z, a, w)
    }
    fn r(&self, z: u8, a: u8, m: &[f64], w: &[f64]) -> f64 {
        self.pick(Component::R).r(z, a, m, w)
    }
    fn b(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
        self.pick(Component::B).b(a, z, m, w)
    }
    fn u(&self, z: u8, a: u8, w: &[f64]) -> f64 {
        self.pick(Component::U).u(z, a, w)
    }
    fn v(&self, a: u8, w: &[f64]) -> f64 {
        self.pick(Component::V).v(a, w)
    }
}
