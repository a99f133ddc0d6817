// SPDX-License-Identifier: Apache-2.0
//! JSON input documents: economy, shock law, signal and engine in one file.
//!
//! Sector indices in documents are one-based, as printed in tables. The
//! observed partition cell is a zero-based position in the `cells` list.

use serde::{Deserialize, Serialize};

use crate::economy::{rows_to_matrix, Economy};
use crate::engine::{Backend, ExpectationEngine, DEFAULT_NUM_DRAWS, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::shocks::{BoxCell, Interval, Observation, ShockModel, SignalModel, SupportPoint};

/// Input-output matrix, either as rows or flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixSpec {
    pub fn rows(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            Self::Rows(r) => Ok(r.clone()),
            Self::Flat(v) if v.len() == n * n => Ok(v.chunks(n.max(1)).map(<[f64]>::to_vec).collect()),
            Self::Flat(v) => Err(Error::DimensionMismatch(format!(
                "A has {} entries, expected {}",
                v.len(),
                n * n
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub eta: Vec<f64>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShockSpec {
    SingleNodeExponential { sector: usize, lambda: f64 },
    IndependentExponential { lambda: Vec<f64> },
    Discrete { support: Vec<PointSpec> },
    Degenerate { eta: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    /// Per-sector `[lower, upper]`, `null` for unbounded.
    pub bounds: Vec<[Option<f64>; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    #[default]
    None,
    /// `eta` is the revealed realization; zero when omitted.
    Full {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<Vec<f64>>,
    },
    Partition { cells: Vec<CellSpec>, observed_cell: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    ExactDiscrete,
    AnalyticExponential,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSpec {
    pub backend: BackendKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_draws")]
    pub num_draws: usize,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_draws() -> usize {
    DEFAULT_NUM_DRAWS
}

impl EngineSpec {
    pub fn engine(&self) -> ExpectationEngine {
        ExpectationEngine::new(match self.backend {
            BackendKind::ExactDiscrete => Backend::ExactDiscrete,
            BackendKind::AnalyticExponential => Backend::AnalyticExponential,
            BackendKind::MonteCarlo => Backend::MonteCarlo { num_draws: self.num_draws, seed: self.seed },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: MatrixSpec,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shock: Option<ShockSpec>,
    #[serde(default)]
    pub signal: SignalSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineSpec>,
}

/// Everything a solver needs, validated.
#[derive(Debug, Clone)]
pub struct Setup {
    pub economy: Economy,
    pub model: Option<ShockModel>,
    pub signal: SignalModel,
    pub observation: Observation,
    pub engine: ExpectationEngine,
    pub warnings: Vec<String>,
}

impl Setup {
    pub fn model(&self) -> Result<&ShockModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::InvalidShock("document has no shock".into()))
    }
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed {
            line: e.line(),
            column: e.column(),
            message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
        })
    }

    /// Document describing `econ`, with β made explicit.
    pub fn from_economy(econ: &Economy, shock: Option<ShockSpec>) -> Self {
        Self {
            n: econ.n(),
            a: MatrixSpec::Rows(econ.io_rows()),
            gamma: econ.consumption_weights().to_vec(),
            theta: econ.leverage().to_vec(),
            beta: Some(econ.labor_shares().to_vec()),
            label: econ.label().map(str::to_string),
            shock,
            signal: SignalSpec::None,
            engine: None,
        }
    }

    pub fn economy(&self) -> Result<Economy> {
        let rows = self.a.rows(self.n)?;
        let io = rows_to_matrix(&rows)?;
        if io.nrows() != self.n {
            return Err(Error::DimensionMismatch(format!("A has {} rows, n = {}", io.nrows(), self.n)));
        }
        Economy::new(io, self.gamma.clone(), self.theta.clone(), self.beta.clone(), self.label.clone())
    }

    pub fn shock_model(&self) -> Result<Option<ShockModel>> {
        let n = self.n;
        let Some(spec) = &self.shock else { return Ok(None) };
        let model = match spec {
            ShockSpec::SingleNodeExponential { sector, lambda } => {
                let sector = zero_based(*sector, n)?;
                ShockModel::SingleNodeExponential { n, sector, rate: *lambda }
            }
            ShockSpec::IndependentExponential { lambda } => {
                ShockModel::IndependentExponential { rates: lambda.clone() }
            }
            ShockSpec::Discrete { support } => ShockModel::Discrete {
                support: support.iter().map(|p| SupportPoint::new(p.eta.clone(), p.p)).collect(),
            },
            ShockSpec::Degenerate { eta } => ShockModel::Degenerate { eta: eta.clone() },
        };
        if model.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "shock has dimension {}, economy has {n} sectors",
                model.n()
            )));
        }
        Ok(Some(model))
    }

    pub fn signal_model(&self) -> Result<(SignalModel, Observation)> {
        Ok(match &self.signal {
            SignalSpec::None => (SignalModel::None, Observation::Constant),
            SignalSpec::Full { eta } => {
                let eta = eta.clone().unwrap_or_else(|| vec![0.0; self.n]);
                if eta.len() != self.n {
                    return Err(Error::DimensionMismatch(format!(
                        "revealed shock has dimension {}, expected {}",
                        eta.len(),
                        self.n
                    )));
                }
                (SignalModel::Full, Observation::Exact(eta))
            }
            SignalSpec::Partition { cells, observed_cell } => {
                if *observed_cell >= cells.len() {
                    return Err(Error::InvalidSignal(format!(
                        "observed cell {observed_cell} out of range for {} cells",
                        cells.len()
                    )));
                }
                let cells = cells
                    .iter()
                    .map(|c| BoxCell {
                        bounds: c.bounds.iter().map(|[lo, hi]| Interval::new(*lo, *hi)).collect(),
                    })
                    .collect();
                (SignalModel::Partition { cells }, Observation::Cell(*observed_cell))
            }
        })
    }

    /// Engine named in the document, else the exact choice for the law.
    pub fn engine_spec(&self) -> EngineSpec {
        self.engine.clone().unwrap_or_else(|| {
            let backend = match self.shock {
                Some(ShockSpec::SingleNodeExponential { .. }) => BackendKind::AnalyticExponential,
                Some(ShockSpec::Discrete { .. }) | Some(ShockSpec::Degenerate { .. }) | None => {
                    BackendKind::ExactDiscrete
                }
                Some(ShockSpec::IndependentExponential { .. }) => BackendKind::MonteCarlo,
            };
            EngineSpec { backend, seed: DEFAULT_SEED, num_draws: DEFAULT_NUM_DRAWS }
        })
    }

    /// Validates every part of the document.
    pub fn setup(&self) -> Result<Setup> {
        let economy = self.economy()?;
        let model = self.shock_model()?;
        let (signal, observation) = self.signal_model()?;
        let mut warnings = Vec::new();
        if let Some(m) = &model {
            warnings.extend(m.validate()?);
            signal.validate(m)?;
        }
        Ok(Setup { economy, model, signal, observation, engine: self.engine_spec().engine(), warnings })
    }

    /// Normal form: matrix as rows, β, signal and engine spelled out.
    pub fn canonical(&self) -> Result<Self> {
        let economy = self.economy()?;
        Ok(Self {
            a: MatrixSpec::Rows(economy.io_rows()),
            beta: Some(economy.labor_shares().to_vec()),
            engine: Some(self.engine_spec()),
            ..self.clone()
        })
    }

    pub fn to_canonical_string(&self) -> Result<String> {
        let doc = self.canonical()?;
        let mut s = serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::InvalidArgument(format!("cannot serialize document: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}

fn zero_based(sector: usize, n: usize) -> Result<usize> {
    if sector == 0 || sector > n {
        return Err(Error::SectorOutOfRange { index: sector, len: n });
    }
    Ok(sector - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{
        "n": 2,
        "A": [[0, 0.5], [0, 0]],
        "gamma": [0.5, 0.5],
        "theta": [1, 1],
        "shock": {"kind": "single_node_exponential", "sector": 2, "lambda": 0.25}
    }"#;

    #[test]
    fn parses_and_derives_labor() {
        let doc = Document::parse(LINE).unwrap();
        let setup = doc.setup().unwrap();
        assert_eq!(setup.economy.labor_shares(), &[1.0, 0.5]);
        assert_eq!(
            setup.model,
            Some(ShockModel::SingleNodeExponential { n: 2, sector: 1, rate: 0.25 })
        );
        assert_eq!(setup.engine.backend, Backend::AnalyticExponential);
    }

    #[test]
    fn canonical_round_trip_is_a_fixed_point() {
        let once = Document::parse(LINE).unwrap().to_canonical_string().unwrap();
        let twice = Document::parse(&once).unwrap().to_canonical_string().unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn flat_matrix_matches_rows() {
        let flat = LINE.replace("[[0, 0.5], [0, 0]]", "[0, 0.5, 0, 0]");
        let a = Document::parse(&flat).unwrap().economy().unwrap();
        let b = Document::parse(LINE).unwrap().economy().unwrap();
        assert_eq!(a.io_rows(), b.io_rows());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let broken = "{\n  \"n\": 2,\n  \"A\": [[0, 0.5], [0 0]]\n}";
        match Document::parse(broken) {
            Err(Error::Malformed { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("expected a positioned error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let extra = LINE.replace("\"n\": 2,", "\"n\": 2, \"alpha\": 1,");
        assert!(matches!(Document::parse(&extra), Err(Error::Malformed { .. })));
    }

    #[test]
    fn sector_zero_is_out_of_range() {
        let bad = LINE.replace("\"sector\": 2", "\"sector\": 0");
        let doc = Document::parse(&bad).unwrap();
        assert!(matches!(doc.setup(), Err(Error::SectorOutOfRange { index: 0, len: 2 })));
    }

    #[test]
    fn partition_signal_observes_the_named_cell() {
        let doc = Document::parse(
            &LINE.replace(
                "\"theta\": [1, 1],",
                r#""theta": [1, 1],
                "signal": {"kind": "partition", "observed_cell": 1,
                  "cells": [{"bounds": [[null, null], [-1, null]]},
                            {"bounds": [[null, null], [null, -1]]}]},"#,
            ),
        )
        .unwrap();
        let setup = doc.setup().unwrap();
        assert_eq!(setup.observation, Observation::Cell(1));
    }
}
