// SPDX-License-Identifier: Apache-2.0
//! Laws of the primitive log-productivity shocks and of the public signal.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::economy::{Economy, Leontief};
use crate::error::{Error, Result};

/// Tolerance on the total mass of a discrete law or a partition.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub eta: Vec<f64>,
    pub prob: f64,
}

impl SupportPoint {
    pub fn new(eta: Vec<f64>, prob: f64) -> Self {
        Self { eta, prob }
    }
}

/// Joint law of the non-positive shock vector `η`.
#[derive(Debug, Clone, PartialEq)]
pub enum ShockModel {
    /// `-η_sector ~ Exp(rate)`, every other coordinate is zero.
    SingleNodeExponential { n: usize, sector: usize, rate: f64 },
    /// Independent `-η_k ~ Exp(rates[k])`.
    IndependentExponential { rates: Vec<f64> },
    Discrete { support: Vec<SupportPoint> },
    /// Deterministic shock; only meaningful for full-information checks.
    Degenerate { eta: Vec<f64> },
}

impl ShockModel {
    pub fn n(&self) -> usize {
        match self {
            Self::SingleNodeExponential { n, .. } => *n,
            Self::IndependentExponential { rates } => rates.len(),
            Self::Discrete { support } => support.first().map_or(0, |p| p.eta.len()),
            Self::Degenerate { eta } => eta.len(),
        }
    }

    /// Checks the invariants of the law and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |m: String| Err(Error::InvalidShock(m));
        match self {
            Self::SingleNodeExponential { n, sector, rate } => {
                if *n == 0 {
                    return bad("shock dimension must be positive".into());
                }
                if sector >= n {
                    return Err(Error::SectorOutOfRange { index: *sector, len: *n });
                }
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("exponential rate {rate} must be positive"));
                }
            }
            Self::IndependentExponential { rates } => {
                if rates.is_empty() {
                    return bad("shock dimension must be positive".into());
                }
                if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
                    return bad(format!("exponential rate {r} must be positive"));
                }
            }
            Self::Discrete { support } => {
                let n = self.n();
                if support.is_empty() || n == 0 {
                    return bad("discrete support is empty".into());
                }
                for (i, p) in support.iter().enumerate() {
                    if p.eta.len() != n {
                        return Err(Error::DimensionMismatch(format!(
                            "support point {i} has dimension {}, expected {n}",
                            p.eta.len()
                        )));
                    }
                    check_non_positive(&p.eta)?;
                    if !(p.prob.is_finite() && p.prob >= 0.0) {
                        return bad(format!("support point {i} has probability {}", p.prob));
                    }
                }
                let total: f64 = support.iter().map(|p| p.prob).sum();
                if (total - 1.0).abs() > MASS_TOL {
                    return bad(format!("probabilities sum to {total}, expected 1"));
                }
                let first = &support.iter().find(|p| p.prob > 0.0).expect("positive mass").eta;
                if support.iter().filter(|p| p.prob > 0.0).all(|p| &p.eta == first) {
                    return bad("discrete law is deterministic; use the degenerate kind".into());
                }
            }
            Self::Degenerate { eta } => {
                if eta.is_empty() {
                    return bad("shock dimension must be positive".into());
                }
                check_non_positive(eta)?;
                return Ok(vec![
                    "degenerate shock law: only full-information identities are meaningful"
                        .into(),
                ]);
            }
        }
        Ok(Vec::new())
    }

    /// The only coordinate that can be non-zero, if there is one.
    pub fn shocked_sector(&self) -> Option<usize> {
        let single = |points: &mut dyn Iterator<Item = &Vec<f64>>| -> Option<usize> {
            let mut found: Option<usize> = None;
            for eta in points {
                for (k, v) in eta.iter().enumerate() {
                    if *v != 0.0 {
                        match found {
                            None => found = Some(k),
                            Some(o) if o == k => {}
                            Some(_) => return None,
                        }
                    }
                }
            }
            found
        };
        match self {
            Self::SingleNodeExponential { sector, .. } => Some(*sector),
            Self::IndependentExponential { rates } => (rates.len() == 1).then_some(0),
            Self::Discrete { support } => {
                single(&mut support.iter().filter(|p| p.prob > 0.0).map(|p| &p.eta))
            }
            Self::Degenerate { eta } => single(&mut std::iter::once(eta)),
        }
    }

    /// Probability that `η` falls in `cell`.
    pub fn cell_probability(&self, cell: &BoxCell) -> f64 {
        match self {
            Self::SingleNodeExponential { n, sector, rate } => (0..*n)
                .map(|k| {
                    if k == *sector {
                        cell.bounds[k].exponential_mass(*rate)
                    } else if cell.bounds[k].contains(0.0) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .product(),
            Self::IndependentExponential { rates } => rates
                .iter()
                .zip(&cell.bounds)
                .map(|(r, b)| b.exponential_mass(*r))
                .product(),
            Self::Discrete { support } => {
                support.iter().filter(|p| cell.contains(&p.eta)).map(|p| p.prob).sum()
            }
            Self::Degenerate { eta } => f64::from(u8::from(cell.contains(eta))),
        }
    }

    /// A reusable sampler; `WeightedIndex` setup is paid once.
    pub fn sampler(&self) -> Result<Sampler<'_>> {
        let categorical = match self {
            Self::Discrete { support } => Some(
                WeightedIndex::new(support.iter().map(|p| p.prob))
                    .map_err(|e| Error::InvalidShock(e.to_string()))?,
            ),
            _ => None,
        };
        Ok(Sampler { model: self, categorical })
    }
}

fn check_non_positive(eta: &[f64]) -> Result<()> {
    match eta.iter().find(|v| !(v.is_finite() && **v <= 0.0)) {
        Some(v) => Err(Error::InvalidShock(format!("shock value {v} must be finite and <= 0"))),
        None => Ok(()),
    }
}

pub struct Sampler<'a> {
    model: &'a ShockModel,
    categorical: Option<WeightedIndex<f64>>,
}

impl Sampler<'_> {
    /// Writes one draw of `η` into `out`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.model {
            ShockModel::SingleNodeExponential { sector, rate, .. } => {
                out.fill(0.0);
                out[*sector] = -Exp::new(*rate).expect("validated rate").sample(rng);
            }
            ShockModel::IndependentExponential { rates } => {
                for (o, r) in out.iter_mut().zip(rates) {
                    *o = -Exp::new(*r).expect("validated rate").sample(rng);
                }
            }
            ShockModel::Discrete { support } => {
                let i = self.categorical.as_ref().expect("discrete sampler").sample(rng);
                out.copy_from_slice(&support[i].eta);
            }
            ShockModel::Degenerate { eta } => out.copy_from_slice(eta),
        }
    }
}

/// Half-open interval `(lower, upper]`; `None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Interval {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Interval {
    pub const UNBOUNDED: Self = Self { lower: None, upper: None };

    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Self {
        Self { lower, upper }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower.is_none_or(|l| x > l) && self.upper.is_none_or(|u| x <= u)
    }

    pub fn lo(&self) -> f64 {
        self.lower.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn hi(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }

    fn overlaps(&self, other: &Self) -> bool {
        self.lo().max(other.lo()) < self.hi().min(other.hi())
    }

    /// Mass of `(lower, upper] ∩ (-∞, 0]` under `η = -Exp(rate)`.
    pub fn exponential_mass(&self, rate: f64) -> f64 {
        let hi = self.hi().min(0.0);
        let lo = self.lo();
        if lo >= hi {
            return 0.0;
        }
        let lower = if lo == f64::NEG_INFINITY { 0.0 } else { (rate * lo).exp() };
        (rate * hi).exp() - lower
    }
}

/// Product of per-coordinate intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCell {
    pub bounds: Vec<Interval>,
}

impl BoxCell {
    pub fn unbounded(n: usize) -> Self {
        Self { bounds: vec![Interval::UNBOUNDED; n] }
    }

    pub fn contains(&self, eta: &[f64]) -> bool {
        self.bounds.iter().zip(eta).all(|(b, x)| b.contains(*x))
    }

    fn overlaps(&self, other: &Self) -> bool {
        self.bounds.iter().zip(&other.bounds).all(|(a, b)| a.overlaps(b))
    }
}

/// What agents observe before shocks realize.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalModel {
    /// Constant signal: no information.
    None,
    /// The signal reveals `η`.
    Full,
    Partition { cells: Vec<BoxCell> },
}

/// A realized value of the public signal.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Constant,
    Exact(Vec<f64>),
    Cell(usize),
}

impl SignalModel {
    pub fn validate(&self, model: &ShockModel) -> Result<()> {
        let Self::Partition { cells } = self else { return Ok(()) };
        let n = model.n();
        if cells.is_empty() {
            return Err(Error::InvalidSignal("partition has no cells".into()));
        }
        if let Some(i) = cells.iter().position(|c| c.bounds.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "cell {i} has {} bounds, expected {n}",
                cells[i].bounds.len()
            )));
        }
        match model {
            ShockModel::Discrete { support } => {
                for (i, p) in support.iter().enumerate().filter(|(_, p)| p.prob > 0.0) {
                    let hits = cells.iter().filter(|c| c.contains(&p.eta)).count();
                    if hits != 1 {
                        return Err(Error::InvalidSignal(format!(
                            "support point {i} lies in {hits} cells"
                        )));
                    }
                }
            }
            ShockModel::Degenerate { eta } => {
                let hits = cells.iter().filter(|c| c.contains(eta)).count();
                if hits != 1 {
                    return Err(Error::InvalidSignal(format!("shock lies in {hits} cells")));
                }
            }
            _ => {
                for (i, a) in cells.iter().enumerate() {
                    if let Some(j) = cells[i + 1..].iter().position(|b| a.overlaps(b)) {
                        return Err(Error::InvalidSignal(format!(
                            "cells {i} and {} overlap",
                            i + 1 + j
                        )));
                    }
                }
                let total: f64 = cells.iter().map(|c| model.cell_probability(c)).sum();
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(Error::InvalidSignal(format!(
                        "cells cover probability {total}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn observe(&self, eta: &[f64]) -> Observation {
        match self {
            Self::None => Observation::Constant,
            Self::Full => Observation::Exact(eta.to_vec()),
            Self::Partition { cells } => Observation::Cell(
                cells.iter().position(|c| c.contains(eta)).unwrap_or(usize::MAX),
            ),
        }
    }
}

/// `ρ = Lη`.
pub fn total_shock(leontief: &Leontief, eta: &[f64]) -> Result<Vec<f64>> {
    if eta.len() != leontief.n() {
        return Err(Error::DimensionMismatch(format!(
            "shock has dimension {}, economy has {} sectors",
            eta.len(),
            leontief.n()
        )));
    }
    Ok(leontief.apply(eta))
}

/// Information-normalized shocks of every sector and of their suppliers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedShocks {
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl NormalizedShocks {
    /// `τ_k = e^{ρ_k} / E[e^{ρ_k} | φ]` and `ε_k = Σ_j τ_j A_{jk} + β_k`, given
    /// the conditional expectations `expected_exp_rho`.
    pub fn new(
        econ: &Economy,
        leontief: &Leontief,
        expected_exp_rho: &[f64],
        eta: &[f64],
    ) -> Result<Self> {
        let rho = total_shock(leontief, eta)?;
        if expected_exp_rho.len() != rho.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} expectations for {} sectors",
                expected_exp_rho.len(),
                rho.len()
            )));
        }
        let tau: Vec<f64> = rho.iter().zip(expected_exp_rho).map(|(r, e)| r.exp() / e).collect();
        let epsilon = supplier_shocks(econ, &tau);
        Ok(Self { rho, tau, epsilon })
    }
}

/// `ε_k = Σ_j τ_j A_{jk} + β_k`.
pub fn supplier_shocks(econ: &Economy, tau: &[f64]) -> Vec<f64> {
    let n = econ.n();
    let beta = econ.labor_shares();
    (0..n)
        .map(|k| beta[k] + (0..n).map(|j| tau[j] * econ.input_share(j, k)).sum::<f64>())
        .collect()
}
