//! Weighted regression engine for the nuisance fits.
//!
//! Binary (and quasi-binomial) responses are fitted by iteratively
//! reweighted least squares with an optional offset; unbounded responses by
//! weighted least squares. Both solve the weighted normal equations with a
//! pivot-checked Cholesky factorisation and fall back to a tiny ridge when
//! the design is rank deficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower/upper clamp applied to every logit-link prediction.
pub const P_CLAMP: f64 = 1e-4;

const PIVOT_TOL: f64 = 1e-13;
const RIDGE: f64 = 1e-8;

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(P_CLAMP, 1.0 - P_CLAMP)
}

/// log(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// A predictor that can enter a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    S,
    A,
    Z,
    W(usize),
    M(usize),
}

/// Values of every selectable predictor for one evaluation point.
#[derive(Debug, Clone, Copy)]
pub struct Point<'a> {
    pub s: f64,
    pub a: f64,
    pub z: f64,
    pub w: &'a [f64],
    pub m: &'a [f64],
}

impl Point<'_> {
    fn value(&self, t: Term) -> f64 {
        match t {
            Term::S => self.s,
            Term::A => self.a,
            Term::Z => self.z,
            Term::W(i) => self.w[i],
            Term::M(i) => self.m[i],
        }
    }
}

/// Columns of a regression: intercept, main terms, then product terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub terms: Vec<Term>,
    /// Each entry is a product of two or more terms.
    pub interactions: Vec<Vec<Term>>,
    pub intercept_only: bool,
}

impl DesignSpec {
    pub fn new(terms: Vec<Term>, interactions: Vec<Vec<Term>>) -> Self {
        DesignSpec {
            terms,
            interactions,
            intercept_only: false,
        }
    }

    pub fn intercept() -> Self {
        DesignSpec {
            terms: vec![],
            interactions: vec![],
            intercept_only: true,
        }
    }

    /// Every product of every subset of `terms`: the full-factorial model,
    /// which is exact for binary predictors.
    pub fn saturated(terms: &[Term]) -> Self {
        let k = terms.len();
        let mut interactions = Vec::new();
        for mask in 1u32..(1 << k) {
            if mask.count_ones() >= 2 {
                interactions.push(
                    (0..k)
                        .filter(|j| mask & (1 << j) != 0)
                        .map(|j| terms[j])
                        .collect(),
                );
            }
        }
        DesignSpec::new(terms.to_vec(), interactions)
    }

    /// Same regression reduced to its intercept.
    pub fn as_intercept_only(&self) -> Self {
        DesignSpec {
            intercept_only: true,
            ..self.clone()
        }
    }

    pub fn ncols(&self) -> usize {
        if self.intercept_only {
            1
        } else {
            1 + self.terms.len() + self.interactions.len()
        }
    }

    fn all_terms(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter().chain(self.interactions.iter().flatten())
    }

    pub fn uses(&self, pred: impl Fn(&Term) -> bool) -> bool {
        !self.intercept_only && self.all_terms().any(pred)
    }

    /// Checks that every selector resolves for `p` covariates and `q` mediators.
    pub fn validate(&self, p: usize, q: usize) -> Result<()> {
        for t in self.all_terms() {
            match *t {
                Term::W(i) if i >= p => {
                    return Err(Error::DimensionMismatch(format!(
                        "design references w{} but only {p} covariates exist",
                        i + 1
                    )))
                }
                Term::M(i) if i >= q => {
                    return Err(Error::DimensionMismatch(format!(
                        "design references m{} but only {q} mediators exist",
                        i + 1
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn push_row(&self, pt: &Point, out: &mut Vec<f64>) {
        out.push(1.0);
        if self.intercept_only {
            return;
        }
        out.extend(self.terms.iter().map(|&t| pt.value(t)));
        out.extend(
            self.interactions
                .iter()
                .map(|prod| prod.iter().map(|&t| pt.value(t)).product::<f64>()),
        );
    }

    pub fn matrix<'a>(&self, points: impl IntoIterator<Item = Point<'a>>) -> Matrix {
        let mut data = Vec::new();
        for pt in points {
            self.push_row(&pt, &mut data);
        }
        Matrix::from_vec(data, self.ncols())
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    ncols: usize,
}

impl Matrix {
    pub fn from_vec(data: Vec<f64>, ncols: usize) -> Self {
        assert!(
            ncols > 0 && data.len().is_multiple_of(ncols),
            "ragged matrix"
        );
        Matrix { data, ncols }
    }

    pub fn column(x: &[f64]) -> Self {
        Matrix::from_vec(x.to_vec(), 1)
    }

    pub fn nrows(&self) -> usize {
        self.data.len() / self.ncols
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    Logit,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub ridge_fallback: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 100,
            ridge_fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub coefficients: Vec<f64>,
    pub link: Link,
    pub design: DesignSpec,
    pub converged: bool,
    pub iterations: usize,
    /// Set when the ridge fallback was needed to solve the normal equations.
    pub ridge: bool,
}

impl FittedModel {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum()
    }

    fn inverse_link(&self, eta: f64) -> f64 {
        match self.link {
            Link::Logit => clamp_prob(expit(eta)),
            Link::Identity => eta,
        }
    }

    pub fn predict_point(&self, pt: &Point) -> f64 {
        let mut row = Vec::with_capacity(self.design.ncols());
        self.design.push_row(pt, &mut row);
        self.inverse_link(self.linear_predictor(&row))
    }
}

/// Link-inverse of `X beta + offset`; logit predictions are clamped to
/// `[P_CLAMP, 1 - P_CLAMP]`.
pub fn predict(model: &FittedModel, x: &Matrix, offset: Option<&[f64]>) -> Result<Vec<f64>> {
    if x.ncols() != model.coefficients.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns, model has {} coefficients",
            x.ncols(),
            model.coefficients.len()
        )));
    }
    if let Some(o) = offset {
        if o.len() != x.nrows() {
            return Err(Error::DimensionMismatch("offset length".into()));
        }
    }
    Ok((0..x.nrows())
        .map(|i| {
            let off = offset.map_or(0.0, |o| o[i]);
            model.inverse_link(model.linear_predictor(x.row(i)) + off)
        })
        .collect())
}

fn check_inputs(x: &Matrix, y: &[f64], weights: &[f64], offset: Option<&[f64]>) -> Result<()> {
    let n = x.nrows();
    if y.len() != n || weights.len() != n || offset.is_some_and(|o| o.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "{n} design rows but {} responses / {} weights",
            y.len(),
            weights.len()
        )));
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidValue {
            row: i,
            msg: "regression weight must be finite and non-negative".into(),
        });
    }
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::AllZeroWeights);
    }
    Ok(())
}

/// Solves `A x = b` for symmetric `A` (row-major, `k x k`). Returns `None`
/// when a pivot is not clearly positive relative to the largest diagonal.
fn cholesky_solve(a: &[f64], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let max_diag = (0..k).map(|i| a[i * k + i]).fold(0.0f64, f64::max);
    if !(max_diag > 0.0 && max_diag.is_finite()) {
        return None;
    }
    let mut l = vec![0.0; k * k];
    for j in 0..k {
        let mut d = a[j * k + j];
        for p in 0..j {
            d -= l[j * k + p] * l[j * k + p];
        }
        // Written so that a NaN pivot also fails.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(d > PIVOT_TOL * max_diag) {
            return None;
        }
        let d = d.sqrt();
        l[j * k + j] = d;
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            l[i * k + j] = s / d;
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * k + p] * y[p];
        }
        y[i] = s / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for p in i + 1..k {
            s -= l[p * k + i] * x[p];
        }
        x[i] = s / l[i * k + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves the weighted normal equations `X'WX beta = X'W r`, engaging the
/// ridge fallback if allowed. Returns the solution and whether ridge was used.
fn weighted_normal_solve(
    x: &Matrix,
    wt: &[f64],
    r: &[f64],
    ridge_fallback: bool,
) -> Result<(Vec<f64>, bool)> {
    let k = x.ncols();
    let mut xtwx = vec![0.0; k * k];
    let mut xtwr = vec![0.0; k];
    for i in 0..x.nrows() {
        let w = wt[i];
        if w == 0.0 {
            continue;
        }
        let row = x.row(i);
        for j in 0..k {
            let wx = w * row[j];
            xtwr[j] += wx * r[i];
            for l in j..k {
                xtwx[j * k + l] += wx * row[l];
            }
        }
    }
    for j in 0..k {
        for l in 0..j {
            xtwx[j * k + l] = xtwx[l * k + j];
        }
    }
    if let Some(beta) = cholesky_solve(&xtwx, &xtwr, k) {
        return Ok((beta, false));
    }
    if !ridge_fallback {
        return Err(Error::SingularDesign);
    }
    let max_diag = (0..k).map(|i| xtwx[i * k + i]).fold(1.0f64, f64::max);
    for j in 0..k {
        xtwx[j * k + j] += RIDGE * max_diag;
    }
    cholesky_solve(&xtwx, &xtwr, k)
        .map(|b| (b, true))
        .ok_or(Error::SingularDesign)
}

fn binomial_nll(eta: &[f64], y: &[f64], w: &[f64]) -> f64 {
    eta.iter()
        .zip(y)
        .zip(w)
        .map(|((&e, &yi), &wi)| {
            if wi == 0.0 {
                0.0
            } else {
                wi * (softplus(e) - yi * e)
            }
        })
        .sum()
}

fn linear_predictors(x: &Matrix, beta: &[f64], offset: Option<&[f64]>) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            let lp: f64 = x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
            lp + offset.map_or(0.0, |o| o[i])
        })
        .collect()
}

/// Trace of one IRLS run, used to check monotone descent.
#[derive(Debug, Clone, Default)]
pub struct IrlsTrace {
    pub nll: Vec<f64>,
}

/// Weighted logistic regression of `y in [0, 1]` with optional offset.
pub fn fit_binary(
    design: &DesignSpec,
    x: &Matrix,
    y: &[f64],
    weights: &[f64],
    offset: Option<&[f64]>,
) -> Result<FittedModel> {
    fit_binary_with(design, x, y, weights, offset, &FitOptions::default(), None)
}

pub fn fit_binary_with(
    design: &DesignSpec,
    x: &Matrix,
    y: &[f64],
    weights: &[f64],
    offset: Option<&[f64]>,
    opts: &FitOptions,
    mut trace: Option<&mut IrlsTrace>,
) -> Result<FittedModel> {
    check_inputs(x, y, weights, offset)?;
    if let Some(i) = y.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidValue {
            row: i,
            msg: format!("binary response {} outside [0, 1]", y[i]),
        });
    }
    let n = x.nrows();
    let k = x.ncols();
    let mut beta = vec![0.0; k];
    let mut eta = linear_predictors(x, &beta, offset);
    let mut nll = binomial_nll(&eta, y, weights);
    if let Some(t) = trace.as_deref_mut() {
        t.nll.push(nll);
    }
    let mut converged = false;
    let mut ridge = false;
    let mut iterations = 0;
    let mut wt = vec![0.0; n];
    let mut work = vec![0.0; n];

    while iterations < opts.max_iter {
        iterations += 1;
        for i in 0..n {
            let mu = expit(eta[i]);
            let var = (mu * (1.0 - mu)).max(1e-12);
            let off = offset.map_or(0.0, |o| o[i]);
            wt[i] = weights[i] * var;
            work[i] = eta[i] - off + (y[i] - mu) / var;
        }
        let (target, used_ridge) = weighted_normal_solve(x, &wt, &work, opts.ridge_fallback)?;
        ridge |= used_ridge;
        let step: Vec<f64> = target.iter().zip(&beta).map(|(t, b)| t - b).collect();

        // Step halving keeps the negative log-likelihood non-increasing.
        let mut frac = 1.0;
        let (cand, cand_eta, cand_nll) = loop {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + frac * s).collect();
            let cand_eta = linear_predictors(x, &cand, offset);
            let cand_nll = binomial_nll(&cand_eta, y, weights);
            if cand_nll <= nll + 1e-12 * nll.abs().max(1.0) || frac < 1e-6 {
                break (cand, cand_eta, cand_nll);
            }
            frac *= 0.5;
        };
        if cand_nll > nll {
            // No descent direction left; keep the current iterate.
            converged = step.iter().all(|s| s.abs() < opts.tol.sqrt());
            break;
        }
        let change = cand
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = cand;
        eta = cand_eta;
        nll = cand_nll;
        if let Some(t) = trace.as_deref_mut() {
            t.nll.push(nll);
        }
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(FittedModel {
        coefficients: beta,
        link: Link::Logit,
        design: design.clone(),
        converged,
        iterations,
        ridge,
    })
}

/// Weighted least squares.
pub fn fit_linear(
    design: &DesignSpec,
    x: &Matrix,
    y: &[f64],
    weights: &[f64],
) -> Result<FittedModel> {
    fit_linear_with(design, x, y, weights, &FitOptions::default())
}

pub fn fit_linear_with(
    design: &DesignSpec,
    x: &Matrix,
    y: &[f64],
    weights: &[f64],
    opts: &FitOptions,
) -> Result<FittedModel> {
    check_inputs(x, y, weights, None)?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidValue {
            row: i,
            msg: "non-finite response".into(),
        });
    }
    let (beta, ridge) = weighted_normal_solve(x, weights, y, opts.ridge_fallback)?;
    Ok(FittedModel {
        coefficients: beta,
        link: Link::Identity,
        design: design.clone(),
        converged: true,
        iterations: 1,
        ridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design_x() -> DesignSpec {
        DesignSpec::new(vec![Term::W(0)], vec![])
    }

    fn x_matrix(xs: &[f64]) -> Matrix {
        let d = design_x();
        d.matrix(xs.iter().map(|x| Point {
            s: 0.0,
            a: 0.0,
            z: 0.0,
            w: std::slice::from_ref(x),
            m: &[],
        }))
    }

    #[test]
    fn intercept_only_symmetric() {
        let d = DesignSpec::intercept();
        let x = Matrix::from_vec(vec![1.0; 4], 1);
        let m = fit_binary(&d, &x, &[0.0, 1.0, 0.0, 1.0], &[1.0; 4], None).unwrap();
        assert!(m.converged);
        assert!(m.coefficients[0].abs() < 1e-12);
    }

    #[test]
    fn recovers_generating_coefficients() {
        // P(Y = 1 | x) = expit(-1 + 2x), x ~ U(-1, 1); n = 50,000.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| f64::from(u8::from(rng.gen::<f64>() < expit(-1.0 + 2.0 * x))))
            .collect();
        let m = fit_binary(&design_x(), &x_matrix(&xs), &ys, &vec![1.0; n], None).unwrap();
        assert!(m.converged);
        assert!(
            (m.coefficients[0] + 1.0).abs() < 0.05,
            "{:?}",
            m.coefficients
        );
        assert!(
            (m.coefficients[1] - 2.0).abs() < 0.05,
            "{:?}",
            m.coefficients
        );
    }

    #[test]
    fn separated_data_does_not_converge_but_predictions_stay_clamped() {
        let xs = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let ys = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let x = x_matrix(&xs);
        let m = fit_binary(&design_x(), &x, &ys, &[1.0; 6], None).unwrap();
        assert!(!m.converged);
        for p in predict(&m, &x, None).unwrap() {
            assert!((P_CLAMP..=1.0 - P_CLAMP).contains(&p));
        }
    }

    #[test]
    fn unit_weights_match_unweighted_fit_exactly() {
        let xs = [0.1, 0.4, -0.3, 0.8, -1.2, 0.0, 0.5];
        let ys = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let x = x_matrix(&xs);
        let a = fit_binary(&design_x(), &x, &ys, &[1.0; 7], None).unwrap();
        let b = fit_binary(&design_x(), &x, &ys, &[1.0; 7], Some(&[0.0; 7])).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
    }

    #[test]
    fn all_zero_weights() {
        let x = x_matrix(&[0.0, 1.0]);
        assert!(matches!(
            fit_binary(&design_x(), &x, &[0.0, 1.0], &[0.0, 0.0], None),
            Err(Error::AllZeroWeights)
        ));
    }

    #[test]
    fn linear_exact_interpolation() {
        let xs = [0.0, 1.0, 2.5, -3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.25 * x).collect();
        let x = x_matrix(&xs);
        let m = fit_linear(&design_x(), &x, &ys, &[1.0; 5]).unwrap();
        for (p, y) in predict(&m, &x, None).unwrap().iter().zip(&ys) {
            assert!((p - y).abs() < 1e-10);
        }
    }

    #[test]
    fn intercept_only_prediction_is_weighted_mean_for_both_links() {
        let d = DesignSpec::intercept();
        let x = Matrix::from_vec(vec![1.0; 5], 1);
        let y = [0.2, 0.9, 0.4, 0.0, 1.0];
        let w = [1.0, 2.0, 0.5, 3.0, 1.5];
        let mean = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        let lin = fit_linear(&d, &x, &y, &w).unwrap();
        assert!((predict(&lin, &x, None).unwrap()[0] - mean).abs() < 1e-12);
        let bin = fit_binary(&d, &x, &y, &w, None).unwrap();
        assert!((predict(&bin, &x, None).unwrap()[0] - mean).abs() < 1e-10);
    }

    #[test]
    fn duplicated_column_is_singular_without_ridge() {
        let d = DesignSpec::new(vec![Term::W(0), Term::W(0)], vec![]);
        let xs = [0.0, 1.0, 2.0, 3.0];
        let x = d.matrix(xs.iter().map(|x| Point {
            s: 0.0,
            a: 0.0,
            z: 0.0,
            w: std::slice::from_ref(x),
            m: &[],
        }));
        let y = [1.0, 2.0, 2.9, 4.2];
        let strict = FitOptions {
            ridge_fallback: false,
            ..FitOptions::default()
        };
        assert!(matches!(
            fit_linear_with(&d, &x, &y, &[1.0; 4], &strict),
            Err(Error::SingularDesign)
        ));
        let m = fit_linear(&d, &x, &y, &[1.0; 4]).unwrap();
        assert!(m.ridge);
    }

    #[test]
    fn zero_coefficients_predict_half_or_offset() {
        let d = design_x();
        let m = FittedModel {
            coefficients: vec![0.0, 0.0],
            link: Link::Logit,
            design: d.clone(),
            converged: true,
            iterations: 0,
            ridge: false,
        };
        let x = x_matrix(&[0.3, -2.0]);
        assert_eq!(predict(&m, &x, None).unwrap(), vec![0.5, 0.5]);
        let off = [0.7, -1.1];
        let p = predict(&m, &x, Some(&off)).unwrap();
        assert!((p[0] - expit(0.7)).abs() < 1e-15);
        assert!((p[1] - expit(-1.1)).abs() < 1e-15);
        assert!(matches!(
            predict(&m, &Matrix::from_vec(vec![1.0; 3], 3), None),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn saturated_design_has_all_products() {
        let d = DesignSpec::saturated(&[Term::S, Term::A, Term::Z]);
        assert_eq!(d.ncols(), 8);
        let mut row = Vec::new();
        d.push_row(
            &Point {
                s: 1.0,
                a: 1.0,
                z: 0.0,
                w: &[],
                m: &[],
            },
            &mut row,
        );
        assert_eq!(row, vec![1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn irls_descends_monotonically(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 60;
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let ys: Vec<f64> = xs
                .iter()
                .map(|&x| f64::from(u8::from(rng.gen::<f64>() < expit(0.3 + 0.8 * x))))
                .collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
            let mut trace = IrlsTrace::default();
            fit_binary_with(&design_x(), &x_matrix(&xs), &ys, &w, None, &FitOptions::default(), Some(&mut trace)).unwrap();
            for pair in trace.nll.windows(2) {
                proptest::prop_assert!(pair[1] <= pair[0] + 1e-9 * pair[0].abs().max(1.0));
            }
        }
    }
}
