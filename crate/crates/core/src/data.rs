//! Observed-data model: one row per sampled unit, plus the effect corners.
//!
//! A row carries the sample-inclusion indicator `delta`, the population
//! indicator `s` (1 = source, 0 = target), covariates `w`, treatment `a`,
//! the binary intermediate confounder `z`, mediators `m`, the outcome `y`
//! (absent in the target population) and the sampling probability `pi`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub delta: u8,
    pub s: u8,
    pub w: Vec<f64>,
    pub a: u8,
    pub z: u8,
    pub m: Vec<f64>,
    pub y: Option<f64>,
    pub pi: Option<f64>,
}

impl Observation {
    pub fn is_source(&self) -> bool {
        self.s == 1
    }

    pub fn is_target(&self) -> bool {
        self.s == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<Observation>,
    pub outcome_bounds: (f64, f64),
}

impl Dataset {
    pub fn new(rows: Vec<Observation>, outcome_bounds: (f64, f64)) -> Self {
        Dataset {
            rows,
            outcome_bounds,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.rows.first().map_or(0, |r| r.w.len())
    }

    /// Number of mediators.
    pub fn q(&self) -> usize {
        self.rows.first().map_or(0, |r| r.m.len())
    }

    /// Rows with `delta = 1`; these form the analysed sample.
    pub fn selected(&self) -> Dataset {
        Dataset {
            rows: self.rows.iter().filter(|r| r.delta == 1).cloned().collect(),
            outcome_bounds: self.outcome_bounds,
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            outcome_bounds: self.outcome_bounds,
        }
    }
}

/// The pair of treatment levels `(a', a*)` defining `theta(a', a*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EffectSpec {
    pub a_prime: u8,
    pub a_star: u8,
}

impl EffectSpec {
    pub fn new(a_prime: u8, a_star: u8) -> Result<Self> {
        for (field, v) in [("a_prime", a_prime), ("a_star", a_star)] {
            if v > 1 {
                return Err(Error::NonBinaryCode {
                    row: 0,
                    field,
                    value: v as f64,
                });
            }
        }
        Ok(EffectSpec { a_prime, a_star })
    }
}

fn check_binary(row: usize, field: &'static str, v: u8) -> Result<()> {
    if v > 1 {
        Err(Error::NonBinaryCode {
            row,
            field,
            value: v as f64,
        })
    } else {
        Ok(())
    }
}

/// Checks every row invariant and returns the dataset unchanged.
pub fn validate_dataset(data: Dataset) -> Result<Dataset> {
    validate_ref(&data)?;
    Ok(data)
}

pub(crate) fn validate_ref(data: &Dataset) -> Result<()> {
    let (lo, hi) = data.outcome_bounds;
    let (p, q) = (data.p(), data.q());
    if data.rows.is_empty() {
        return Err(Error::EmptyArm { s: 0 });
    }
    if p == 0 || q == 0 {
        return Err(Error::DimensionMismatch(
            "at least one covariate and one mediator are required".into(),
        ));
    }
    let mut seen = [false, false];
    for (i, r) in data.rows.iter().enumerate() {
        check_binary(i, "delta", r.delta)?;
        check_binary(i, "s", r.s)?;
        check_binary(i, "a", r.a)?;
        check_binary(i, "z", r.z)?;
        if r.w.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "row {i}: {} covariates, expected {p}",
                r.w.len()
            )));
        }
        if r.m.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "row {i}: {} mediators, expected {q}",
                r.m.len()
            )));
        }
        if r.w.iter().chain(&r.m).any(|x| !x.is_finite()) {
            return Err(Error::InvalidValue {
                row: i,
                msg: "non-finite covariate or mediator".into(),
            });
        }
        if let Some(pi) = r.pi {
            if !(pi > 0.0 && pi <= 1.0) {
                return Err(Error::InvalidValue {
                    row: i,
                    msg: format!("pi = {pi} outside (0, 1]"),
                });
            }
        }
        match r.y {
            None if r.s == 1 && r.delta == 1 => return Err(Error::MissingOutcome { row: i }),
            Some(y) if !(y.is_finite() && y >= lo && y <= hi) => {
                return Err(Error::InvalidValue {
                    row: i,
                    msg: format!("y = {y} outside outcome bounds [{lo}, {hi}]"),
                })
            }
            _ => {}
        }
        if r.delta == 1 {
            seen[r.s as usize] = true;
        }
    }
    for s in 0..2u8 {
        if !seen[s as usize] {
            return Err(Error::EmptyArm { s });
        }
    }
    Ok(())
}

/// Affine map between the original outcome scale and `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeScale {
    pub lo: f64,
    pub hi: f64,
}

impl OutcomeScale {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::DegenerateBounds { lo, hi });
        }
        Ok(OutcomeScale { lo, hi })
    }

    pub fn range(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn to_unit(&self, y: f64) -> f64 {
        (y - self.lo) / self.range()
    }

    /// Maps a unit-scale mean (a level, not a contrast) back.
    pub fn level_from_unit(&self, theta: f64) -> f64 {
        self.lo + theta * self.range()
    }

    /// Maps a unit-scale difference or standard error back.
    pub fn spread_from_unit(&self, d: f64) -> f64 {
        d * self.range()
    }
}

/// Rescales `y` to `[0, 1]` and returns the map needed to undo it.
pub fn scale_outcome(data: &Dataset) -> Result<(Dataset, OutcomeScale)> {
    let (lo, hi) = data.outcome_bounds;
    let scale = OutcomeScale::new(lo, hi)?;
    let rows = data
        .rows
        .iter()
        .map(|r| Observation {
            y: r.y.map(|y| scale.to_unit(y)),
            ..r.clone()
        })
        .collect();
    Ok((Dataset::new(rows, (0.0, 1.0)), scale))
}
