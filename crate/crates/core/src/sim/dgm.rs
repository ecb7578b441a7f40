//! The all-Bernoulli data-generating mechanism of the simulation study.
//!
//! `S` depends on `W` only; the sampling indicator `Delta` enters nothing
//! downstream, so the analysed sample differs from the population only
//! through the covariate distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::regress::expit;

fn ln(x: f64) -> f64 {
    x.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W2Coef {
    pub base: f64,
    pub w1: f64,
}

/// Log-odds coefficients of P(Delta = 1 | W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaCoef {
    pub intercept: f64,
    pub w1: f64,
    pub w2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SCoef {
    pub intercept: f64,
    pub w1: f64,
    pub w2: f64,
    pub w1w2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZCoef {
    pub intercept: f64,
    pub a: f64,
    pub w2: f64,
    pub s: f64,
    pub a_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MCoef {
    pub intercept: f64,
    pub z: f64,
    pub w2: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YCoef {
    pub intercept: f64,
    pub z: f64,
    pub m: f64,
    pub w2: f64,
    pub w2_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgmParams {
    pub p_w1: f64,
    pub w2: W2Coef,
    pub delta: DeltaCoef,
    pub s: SCoef,
    pub p_a: f64,
    pub z: ZCoef,
    pub m: MCoef,
    pub y: YCoef,
}

impl Default for DgmParams {
    fn default() -> Self {
        DgmParams {
            p_w1: 0.5,
            w2: W2Coef { base: 0.4, w1: 0.2 },
            delta: DeltaCoef {
                intercept: -1.0,
                w1: ln(4.0),
                w2: ln(4.0),
            },
            s: SCoef {
                intercept: 0.0,
                w1: ln(1.2),
                w2: ln(1.2),
                w1w2: ln(1.2),
            },
            p_a: 0.5,
            z: ZCoef {
                intercept: -ln(2.0),
                a: ln(4.0),
                w2: -ln(2.0),
                s: ln(1.4),
                a_s: ln(1.43),
            },
            m: MCoef {
                intercept: -ln(2.0),
                z: ln(4.0),
                w2: -ln(1.4),
                s: ln(1.4),
            },
            y: YCoef {
                intercept: -ln(5.0),
                z: ln(8.0),
                m: ln(4.0),
                w2: -ln(1.2),
                w2_z: ln(1.2),
            },
        }
    }
}

fn bern(p1: f64, x: u8) -> f64 {
    if x == 1 {
        p1
    } else {
        1.0 - p1
    }
}

impl DgmParams {
    /// Overrides one coefficient by dotted path, e.g. `y.m=0` or `p_a=0.3`.
    pub fn set(&mut self, path: &str, value: f64) -> Result<()> {
        let mut json = serde_json::to_value(*self).expect("params serialise");
        let mut slot = &mut json;
        for key in path.split('.') {
            slot = slot
                .get_mut(key)
                .ok_or_else(|| Error::Config(format!("unknown parameter `{path}`")))?;
        }
        if !slot.is_number() {
            return Err(Error::Config(format!(
                "`{path}` is a group, not a coefficient"
            )));
        }
        *slot = serde_json::json!(value);
        *self = serde_json::from_value(json).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn with_overrides<S: AsRef<str>>(mut self, overrides: &[S]) -> Result<Self> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("override `{o}` has a non-numeric value")))?;
            self.set(k.trim(), v)?;
        }
        Ok(self)
    }

    pub fn pr_w(&self, w1: u8, w2: u8) -> f64 {
        bern(self.p_w1, w1) * bern(self.w2.base + self.w2.w1 * f64::from(w1), w2)
    }

    /// Sampling probability P(Delta = 1 | W).
    pub fn pi(&self, w1: u8, w2: u8) -> f64 {
        let d = &self.delta;
        expit(d.intercept + d.w1 * f64::from(w1) + d.w2 * f64::from(w2))
    }

    pub fn pr_s(&self, s: u8, w1: u8, w2: u8) -> f64 {
        let c = &self.s;
        let (w1, w2) = (f64::from(w1), f64::from(w2));
        bern(
            expit(c.intercept + c.w1 * w1 + c.w2 * w2 + c.w1w2 * w1 * w2),
            s,
        )
    }

    pub fn pr_a(&self, a: u8) -> f64 {
        bern(self.p_a, a)
    }

    pub fn pr_z(&self, z: u8, a: u8, s: u8, w2: u8) -> f64 {
        let c = &self.z;
        let (a, s) = (f64::from(a), f64::from(s));
        bern(
            expit(c.intercept + c.a * a + c.w2 * f64::from(w2) + c.s * s + c.a_s * a * s),
            z,
        )
    }

    pub fn pr_m(&self, m: u8, z: u8, s: u8, w2: u8) -> f64 {
        let c = &self.m;
        bern(
            expit(c.intercept + c.z * f64::from(z) + c.w2 * f64::from(w2) + c.s * f64::from(s)),
            m,
        )
    }

    /// E(Y | Z, M, W), identical in both populations.
    pub fn mean_y(&self, z: u8, m: u8, w2: u8) -> f64 {
        let c = &self.y;
        let (z, w2) = (f64::from(z), f64::from(w2));
        expit(c.intercept + c.z * z + c.m * f64::from(m) + c.w2 * w2 + c.w2_z * w2 * z)
    }
}

/// Draws `n` units and keeps those with `Delta = 1`.
pub fn generate(params: &DgmParams, n: usize, seed: u64) -> Dataset {
    generate_stream(params, n, seed, 0)
}

/// Like [`generate`] on stream `stream` of the generator keyed by `seed`, so
/// replication `r` of a study gets the same data whatever thread runs it.
pub fn generate_stream(params: &DgmParams, n: usize, seed: u64, stream: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut draw = |p: f64| -> u8 { u8::from(rng.gen::<f64>() < p) };
    let mut rows = Vec::new();
    for _ in 0..n {
        let w1 = draw(params.p_w1);
        let w2 = draw(params.w2.base + params.w2.w1 * f64::from(w1));
        let pi = params.pi(w1, w2);
        let delta = draw(pi);
        let s = draw(params.pr_s(1, w1, w2));
        let a = draw(params.p_a);
        let z = draw(params.pr_z(1, a, s, w2));
        let m = draw(params.pr_m(1, z, s, w2));
        let y = draw(params.mean_y(z, m, w2));
        if delta == 1 {
            rows.push(Observation {
                delta,
                s,
                w: vec![f64::from(w1), f64::from(w2)],
                a,
                z,
                m: vec![f64::from(m)],
                y: (s == 1).then_some(f64::from(y)),
                pi: Some(pi),
            });
        }
    }
    Dataset::new(rows, (0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_sample_moments() {
        // Keep every unit so the marginal moments are unconditional.
        let p = DgmParams {
            delta: DeltaCoef {
                intercept: 40.0,
                w1: 0.0,
                w2: 0.0,
            },
            ..DgmParams::default()
        };
        let d = generate(&p, 1_000_000, 11);
        assert_eq!(d.len(), 1_000_000);
        let mean_a = d.rows.iter().map(|r| f64::from(r.a)).sum::<f64>() / d.len() as f64;
        assert!((mean_a - 0.5).abs() < 0.002, "{mean_a}");
        let (n1, n12) = d.rows.iter().fold((0.0, 0.0), |(n, k), r| {
            if r.w[0] == 1.0 {
                (n + 1.0, k + r.w[1])
            } else {
                (n, k)
            }
        });
        assert!((n12 / n1 - 0.6).abs() < 0.002, "{}", n12 / n1);
    }

    #[test]
    fn selection_and_outcome_blanking() {
        let p = DgmParams::default();
        let d = generate(&p, 20_000, 3);
        assert!(d.rows.iter().all(|r| r.delta == 1));
        assert!(d.rows.iter().all(|r| r.y.is_some() == (r.s == 1)));
        for r in &d.rows {
            let pi = p.pi(r.w[0] as u8, r.w[1] as u8);
            assert_eq!(r.pi, Some(pi));
        }
        let expected: f64 = (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .map(|(w1, w2)| p.pr_w(w1, w2) * p.pi(w1, w2))
            .sum();
        let share = d.len() as f64 / 20_000.0;
        assert!((share - expected).abs() < 0.015, "{share} vs {expected}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let p = DgmParams::default();
        assert_eq!(
            generate_stream(&p, 500, 9, 4),
            generate_stream(&p, 500, 9, 4)
        );
        assert_ne!(
            generate_stream(&p, 500, 9, 4),
            generate_stream(&p, 500, 9, 5)
        );
    }

    #[test]
    fn overrides() {
        let p = DgmParams::default()
            .with_overrides(&["y.m=0", "p_a = 0.3"])
            .unwrap();
        assert_eq!(p.y.m, 0.0);
        assert_eq!(p.p_a, 0.3);
        assert!(DgmParams::default().with_overrides(&["y.q=1"]).is_err());
        assert!(DgmParams::default().with_overrides(&["y=1"]).is_err());
        assert!(DgmParams::default().with_overrides(&["y.m"]).is_err());
    }

    #[test]
    fn conditionals_normalise() {
        let p = DgmParams::default();
        let tot: f64 = (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .map(|(w1, w2)| p.pr_w(w1, w2))
            .sum();
        assert!((tot - 1.0).abs() < 1e-15);
        for w2 in 0..2 {
            for s in 0..2 {
                for a in 0..2 {
                    assert!((p.pr_z(0, a, s, w2) + p.pr_z(1, a, s, w2) - 1.0).abs() < 1e-15);
                    assert!((p.pr_m(0, a, s, w2) + p.pr_m(1, a, s, w2) - 1.0).abs() < 1e-15);
                }
            }
        }
    }
}
