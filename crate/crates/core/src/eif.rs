//! Efficient influence function of `theta(a', a*)`, evaluated per row.
//!
//! The four terms are each non-zero only on one slice of the data:
//! `d_y` on `{s = 1, a = a'}`, `d_z` on `{s = 0, a = a'}`, `d_m` on
//! `{s = 0, a = a*}` and `d_w` on `{s = 0}`. `Z` is binary, so the integral
//! over `z` in `d_z` and `d_m` reduces to two terms.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::nuisance::{marginalized_outcome, Nuisance};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EifComponents {
    pub d_y: f64,
    pub d_z: f64,
    pub d_m: f64,
    pub d_w: f64,
    pub total: f64,
}

impl EifComponents {
    fn new(d_y: f64, d_z: f64, d_m: f64, d_w: f64) -> Self {
        EifComponents {
            d_y,
            d_z,
            d_m,
            d_w,
            total: d_y + d_z + d_m + d_w,
        }
    }
}

/// Evaluates the four influence-function terms at one observation. `theta`
/// is on the unit outcome scale.
pub fn eif_row(obs: &Observation, eta: &dyn Nuisance, theta: f64) -> Result<EifComponents> {
    let spec = eta.effect();
    let (ap, ast) = (spec.a_prime, spec.a_star);
    let t = eta.t();
    let (w, m) = (obs.w.as_slice(), obs.m.as_slice());

    let d_y = if obs.is_source() && obs.a == ap {
        let y = obs.y.ok_or(Error::MissingOutcome { row: 0 })?;
        let c = eta.c(ap, obs.z, m, w);
        (1.0 - c) / c * eta.h(ap, obs.z, m, w) * (y - eta.b(ap, obs.z, m, w)) / (t * eta.g(ap, w))
    } else {
        0.0
    };

    let (d_z, d_m, d_w) = if obs.is_target() {
        let d_z = if obs.a == ap {
            (eta.u(1, ap, w) - eta.u(0, ap, w)) * (f64::from(obs.z) - eta.q(1, ap, w))
                / (t * eta.g(ap, w))
        } else {
            0.0
        };
        let v = eta.v(ast, w);
        let d_m = if obs.a == ast {
            (marginalized_outcome(eta, m, w) - v) / (t * eta.g(ast, w))
        } else {
            0.0
        };
        (d_z, d_m, (v - theta) / t)
    } else {
        (0.0, 0.0, 0.0)
    };

    Ok(EifComponents::new(d_y, d_z, d_m, d_w))
}

/// `d_z` written as `u(z, a', w) - sum_z' u(z', a', w) q(z' | a', w)` rather
/// than through the binary-`z` shortcut.
pub fn d_z_integral_form(obs: &Observation, eta: &dyn Nuisance) -> f64 {
    let ap = eta.effect().a_prime;
    if !(obs.is_target() && obs.a == ap) {
        return 0.0;
    }
    let w = obs.w.as_slice();
    let mean_u: f64 = (0..2u8).map(|z| eta.u(z, ap, w) * eta.q(z, ap, w)).sum();
    (eta.u(obs.z, ap, w) - mean_u) / (eta.t() * eta.g(ap, w))
}

/// Chooses the nuisance suite that applies to each row (cross-fitting
/// evaluates row `i` with the suite trained without its fold).
pub trait NuisanceByRow: Sync {
    fn for_row(&self, i: usize) -> &dyn Nuisance;
}

impl<T: Nuisance> NuisanceByRow for T {
    fn for_row(&self, _: usize) -> &dyn Nuisance {
        self
    }
}

/// One suite per fold plus the fold index of every row.
pub struct Folded<'a, N> {
    pub suites: &'a [N],
    pub fold_of: &'a [usize],
}

impl<N: Nuisance> NuisanceByRow for Folded<'_, N> {
    fn for_row(&self, i: usize) -> &dyn Nuisance {
        &self.suites[self.fold_of[i]]
    }
}

/// Weighted influence-function values over a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EifSample {
    pub components: Vec<EifComponents>,
    /// `gamma_i * total_i`.
    pub weighted: Vec<f64>,
    pub mean: f64,
    /// Sample variance of `weighted`; divide by `n` for the squared SE.
    pub variance: f64,
}

impl EifSample {
    pub fn se(&self) -> f64 {
        (self.variance / self.weighted.len() as f64).sqrt()
    }

    /// Weighted mean of one component selected by `f`.
    pub fn component_mean(&self, gamma: &[f64], f: impl Fn(&EifComponents) -> f64) -> f64 {
        self.components
            .iter()
            .zip(gamma)
            .map(|(c, g)| g * f(c))
            .sum::<f64>()
            / self.components.len() as f64
    }
}

pub fn mean_and_variance(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

pub fn eif_sample(
    data: &Dataset,
    eta: &dyn NuisanceByRow,
    theta: f64,
    gamma: &[f64],
) -> Result<EifSample> {
    if gamma.len() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} rows",
            gamma.len(),
            data.len()
        )));
    }
    let components = data
        .rows
        .iter()
        .enumerate()
        .map(|(i, o)| {
            eif_row(o, eta.for_row(i), theta).map_err(|e| match e {
                Error::MissingOutcome { .. } => Error::MissingOutcome { row: i },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let weighted: Vec<f64> = components
        .iter()
        .zip(gamma)
        .map(|(c, g)| g * c.total)
        .collect();
    let (mean, variance) = mean_and_variance(&weighted);
    Ok(EifSample {
        components,
        weighted,
        mean,
        variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EffectSpec;

    /// A nuisance suite given by constant-ish closed forms.
    struct Toy {
        spec: EffectSpec,
        shift: f64,
    }

    impl Nuisance for Toy {
        fn effect(&self) -> EffectSpec {
            self.spec
        }
        fn t(&self) -> f64 {
            0.4
        }
        fn c(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
            0.3 + 0.1 * f64::from(a) + 0.05 * f64::from(z) + 0.1 * m[0] * w[0]
        }
        fn g(&self, a: u8, w: &[f64]) -> f64 {
            let p = 0.4 + 0.2 * w[0];
            if a == 1 {
                p
            } else {
                1.0 - p
            }
        }
        fn e(&self, a: u8, m: &[f64], _: &[f64]) -> f64 {
            let p = 0.45 + 0.1 * m[0];
            if a == 1 {
                p
            } else {
                1.0 - p
            }
        }
        fn q(&self, z: u8, a: u8, w: &[f64]) -> f64 {
            let p = 0.3 + 0.3 * f64::from(a) + 0.1 * w[0] + self.shift;
            if z == 1 {
                p
            } else {
                1.0 - p
            }
        }
        fn r(&self, z: u8, a: u8, m: &[f64], w: &[f64]) -> f64 {
            let p = 0.35 + 0.2 * f64::from(a) + 0.1 * m[0] + 0.05 * w[0];
            if z == 1 {
                p
            } else {
                1.0 - p
            }
        }
        fn b(&self, a: u8, z: u8, m: &[f64], w: &[f64]) -> f64 {
            0.1 + 0.2 * f64::from(z) + 0.3 * m[0] + 0.1 * w[0] + 0.05 * f64::from(a)
        }
        fn u(&self, z: u8, _: u8, w: &[f64]) -> f64 {
            0.2 + 0.4 * f64::from(z) + 0.1 * w[0]
        }
        fn v(&self, a: u8, w: &[f64]) -> f64 {
            0.3 + 0.1 * f64::from(a) + 0.2 * w[0]
        }
    }

    fn obs(s: u8, a: u8, z: u8, m: f64, w: f64) -> Observation {
        Observation {
            delta: 1,
            s,
            w: vec![w],
            a,
            z,
            m: vec![m],
            y: (s == 1).then_some(0.7),
            pi: None,
        }
    }

    fn toy() -> Toy {
        Toy {
            spec: EffectSpec::new(1, 0).unwrap(),
            shift: 0.0,
        }
    }

    #[test]
    fn target_rows_have_no_outcome_term() {
        let d = eif_row(&obs(0, 1, 1, 1.0, 0.0), &toy(), 0.5).unwrap();
        assert_eq!(d.d_y, 0.0);
        assert!(d.d_z != 0.0);
    }

    #[test]
    fn source_rows_only_have_outcome_term() {
        let d = eif_row(&obs(1, 1, 0, 1.0, 1.0), &toy(), 0.5).unwrap();
        assert_eq!((d.d_z, d.d_m, d.d_w), (0.0, 0.0, 0.0));
        assert!(d.d_y != 0.0);
        assert_eq!(d.total, d.d_y);
    }

    #[test]
    fn missing_outcome_on_source_row() {
        let mut o = obs(1, 1, 0, 1.0, 1.0);
        o.y = None;
        assert!(matches!(
            eif_row(&o, &toy(), 0.5),
            Err(Error::MissingOutcome { .. })
        ));
    }

    #[test]
    fn binary_and_integral_d_z_agree() {
        for shift in [-0.2, 0.0, 0.15] {
            let eta = Toy { shift, ..toy() };
            for z in 0..2 {
                for w in [0.0, 1.0] {
                    let o = obs(0, 1, z, 1.0, w);
                    let fast = eif_row(&o, &eta, 0.3).unwrap().d_z;
                    assert!((fast - d_z_integral_form(&o, &eta)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unit_gamma_is_unweighted_and_theta_shift_only_moves_d_w() {
        let rows = vec![
            obs(1, 1, 0, 1.0, 1.0),
            obs(1, 0, 1, 0.0, 0.0),
            obs(0, 1, 1, 1.0, 0.0),
            obs(0, 0, 0, 0.0, 1.0),
            obs(0, 0, 1, 1.0, 1.0),
        ];
        let data = Dataset::new(rows, (0.0, 1.0));
        let eta = toy();
        let ones = vec![1.0; data.len()];
        let s = eif_sample(&data, &eta, 0.4, &ones).unwrap();
        for (o, (c, wv)) in data.rows.iter().zip(s.components.iter().zip(&s.weighted)) {
            assert_eq!(*wv, c.total);
            assert_eq!(*c, eif_row(o, &eta, 0.4).unwrap());
        }

        let gamma = vec![0.5, 1.5, 0.8, 1.2, 1.0];
        let delta = 0.1;
        let a = eif_sample(&data, &eta, 0.4, &gamma).unwrap();
        let b = eif_sample(&data, &eta, 0.4 + delta, &gamma).unwrap();
        let target_mass: f64 = data
            .rows
            .iter()
            .zip(&gamma)
            .filter(|(r, _)| r.is_target())
            .map(|(_, g)| g / eta.t())
            .sum::<f64>()
            / data.len() as f64;
        assert!((b.mean - (a.mean - delta * target_mass)).abs() < 1e-12);
        for (x, y) in a.components.iter().zip(&b.components) {
            assert_eq!((x.d_y, x.d_z, x.d_m), (y.d_y, y.d_z, y.d_m));
        }
    }
}
