// SPDX-License-Identifier: Apache-2.0
//! The directed line and directed cycle networks and table reproduction.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::economy::{Economy, Leontief};
use crate::engine::{Estimate, ExpectationEngine};
use crate::equilibrium::{solve, Solution};
use crate::error::{Error, Result};
use crate::montecarlo::{compare_leverage, run_campaign, CampaignConfig, SimulationReport, DEFAULT_BINS};
use crate::shocks::{Observation, ShockModel, SignalModel};

pub const DEFAULT_ALPHA: f64 = 0.6;
pub const DEFAULT_RATE: f64 = 0.25;
/// Shocked sector of the experiments, zero-based (the second sector).
pub const SHOCKED_SECTOR: usize = 1;
pub const SECTORS: usize = 4;

fn chain(n: usize, alpha: f64, gamma: Option<Vec<f64>>, closed: bool, label: &str) -> Result<Economy> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("a {label} needs at least 2 sectors")));
    }
    let mut a = DMatrix::zeros(n, n);
    for k in 0..n - 1 {
        a[(k, k + 1)] = alpha;
    }
    if closed {
        a[(n - 1, 0)] = alpha;
    }
    let gamma = gamma.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    Economy::new(a, gamma, vec![0.0; n], None, Some(format!("{label}{n}")))
}

/// Sector `k` buys only from sector `k - 1`, with weight `alpha`.
pub fn make_line(n: usize, alpha: f64, gamma: Option<Vec<f64>>) -> Result<Economy> {
    chain(n, alpha, gamma, false, "line")
}

/// The line closed by a link from the last sector to the first.
pub fn make_cycle(n: usize, alpha: f64, gamma: Option<Vec<f64>>) -> Result<Economy> {
    chain(n, alpha, gamma, true, "cycle")
}

/// Exponential shock of the experiments hitting the second sector.
pub fn experiment_shock(n: usize) -> ShockModel {
    ShockModel::SingleNodeExponential { n, sector: SHOCKED_SECTOR, rate: DEFAULT_RATE }
}

/// The two experiment networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Line,
    Cycle,
}

impl Topology {
    pub fn build(self, n: usize, alpha: f64) -> Result<Economy> {
        match self {
            Self::Line => make_line(n, alpha, None),
            Self::Cycle => make_cycle(n, alpha, None),
        }
    }
}

/// A solved experiment: four sectors, uniform leverage, no information.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub economy: Economy,
    pub leontief: Leontief,
    pub model: ShockModel,
    pub solution: Solution,
}

impl Experiment {
    pub fn solve(topology: Topology, theta: f64, engine: &ExpectationEngine) -> Result<Self> {
        let economy = topology.build(SECTORS, DEFAULT_ALPHA)?.with_leverage(vec![theta; SECTORS])?;
        let leontief = Leontief::new(&economy)?;
        let model = experiment_shock(SECTORS);
        let law = engine.condition(&model, &SignalModel::None, &Observation::Constant)?;
        let solution = solve(&economy, &leontief, &law)?;
        Ok(Self { economy, leontief, model, solution })
    }

    pub fn campaign(&self, config: CampaignConfig) -> Result<SimulationReport> {
        run_campaign(
            &self.economy,
            &self.leontief,
            &self.solution.profile,
            &self.solution.equilibrium,
            &self.model,
            &SignalModel::None,
            &Observation::Constant,
            config,
        )
    }
}

/// A published table cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoldenCell {
    pub table: &'static str,
    /// Leverage of the row block, when the table has one.
    pub theta: Option<f64>,
    /// One-based sector label as printed.
    pub sector: usize,
    pub column: &'static str,
    pub value: f64,
}

const fn cell(table: &'static str, theta: Option<f64>, sector: usize, column: &'static str, value: f64) -> GoldenCell {
    GoldenCell { table, theta, sector, column, value }
}

macro_rules! block {
    ($table:literal, $theta:expr, [$($col:literal),+], [$([$($v:expr),+]),+]) => {{
        let cols = [$($col),+];
        let rows: &[&[f64]] = &[$(&[$($v),+]),+];
        let mut out = Vec::new();
        for (s, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                out.push(cell($table, $theta, s + 1, cols[c], *v));
            }
        }
        out
    }};
}

/// Published values of a table.
pub fn golden(table: TableId) -> Vec<GoldenCell> {
    let h = Some(0.5);
    let one = Some(1.0);
    match table {
        TableId::LineQuantities => [
            block!("1", h, ["y", "l", "c", "p/w"], [[0.54, 0.54, 0.33, 1.0], [0.36, 0.14, 0.19, 8.62], [0.34, 0.19, 0.22, 5.16], [0.24, 0.12, 0.24, 3.33]]),
            block!("1", one, ["y", "l", "c", "p/w"], [[0.55, 0.55, 0.36, 1.0], [0.31, 0.12, 0.17, 10.73], [0.31, 0.2, 0.2, 6.14], [0.23, 0.13, 0.23, 3.78]]),
        ]
        .concat(),
        TableId::LineFinance => [
            block!("2", h, ["zeta", "xi", "v0", "v_zeta"], [[0.0, 0.0, 0.54, 0.54], [0.55, 0.55, 0.49, 0.61], [0.09, 0.42, 0.4, 0.52], [0.06, 0.31, 0.25, 0.33]]),
            block!("2", one, ["zeta", "xi", "v0", "v_zeta"], [[0.0, 0.0, 0.54, 0.55], [0.77, 0.77, 0.49, 0.66], [0.13, 0.59, 0.4, 0.56], [0.08, 0.44, 0.25, 0.36]]),
        ]
        .concat(),
        TableId::LineProfits => [
            block!("3", h, ["profit_sd"], [[0.0], [0.82], [0.14], [0.06]]),
            block!("3", one, ["profit_sd"], [[0.0], [0.88], [0.15], [0.07]]),
        ]
        .concat(),
        TableId::LineCascades => block!("4", None, ["default_prob"], [[0.0], [0.6685], [0.4641], [0.3742]]),
        TableId::CycleQuantities => [
            block!("5", h, ["y", "l", "c", "p/w"], [[0.51, 0.25, 0.28, 2.54], [0.43, 0.2, 0.2, 9.87], [0.49, 0.28, 0.23, 5.82], [0.52, 0.27, 0.25, 3.7]]),
            block!("5", one, ["y", "l", "c", "p/w"], [[0.48, 0.25, 0.28, 2.78], [0.37, 0.18, 0.18, 12.21], [0.44, 0.28, 0.21, 6.96], [0.49, 0.28, 0.25, 4.23]]),
        ]
        .concat(),
        TableId::CycleFinance => [
            block!("6", h, ["zeta", "xi", "v0", "v_zeta"], [[0.04, 0.24, 0.625, 0.66], [0.42, 0.57, 0.625, 0.77], [0.1, 0.44, 0.625, 0.76], [0.07, 0.33, 0.625, 0.73]]),
            block!("6", one, ["zeta", "xi", "v0", "v_zeta"], [[0.06, 0.34, 0.625, 0.67], [0.58, 0.78, 0.625, 0.82], [0.15, 0.62, 0.625, 0.82], [0.1, 0.47, 0.625, 0.78]]),
        ]
        .concat(),
        TableId::CycleProfits => [
            block!("7", h, ["profit_sd"], [[0.09], [0.89], [0.23], [0.15]]),
            block!("7", one, ["profit_sd"], [[0.09], [0.95], [0.25], [0.16]]),
        ]
        .concat(),
        // Printed in percent.
        TableId::CycleCascades => block!("8", one, ["default_prob"], [[0.3179], [0.7241], [0.4901], [0.3974]]),
        TableId::CycleMinusLine => block!("cycle-minus-line", one, ["zeta", "xi", "y", "c", "default_prob"], [
            [0.06, 0.34, -0.07, -0.08, 0.3179],
            [-0.19, 0.01, 0.06, 0.01, 0.0556],
            [0.02, 0.03, 0.13, 0.01, 0.026],
            [0.02, 0.03, 0.26, 0.02, 0.0233]
        ]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableId {
    LineQuantities,
    LineFinance,
    LineProfits,
    LineCascades,
    CycleQuantities,
    CycleFinance,
    CycleProfits,
    CycleCascades,
    CycleMinusLine,
}

impl TableId {
    pub const ALL: [Self; 9] = [
        Self::LineQuantities,
        Self::LineFinance,
        Self::LineProfits,
        Self::LineCascades,
        Self::CycleQuantities,
        Self::CycleFinance,
        Self::CycleProfits,
        Self::CycleCascades,
        Self::CycleMinusLine,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::LineQuantities => "1",
            Self::LineFinance => "2",
            Self::LineProfits => "3",
            Self::LineCascades => "4",
            Self::CycleQuantities => "5",
            Self::CycleFinance => "6",
            Self::CycleProfits => "7",
            Self::CycleCascades => "8",
            Self::CycleMinusLine => "cycle-minus-line",
        }
    }

    /// Needs a Monte Carlo campaign.
    pub fn is_simulated(self) -> bool {
        matches!(
            self,
            Self::LineProfits | Self::LineCascades | Self::CycleProfits | Self::CycleCascades | Self::CycleMinusLine
        )
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.label() == s.trim())
            .ok_or_else(|| Error::UnknownTable(s.to_string()))
    }
}

/// Absolute tolerance for deterministic cells printed with two decimals.
pub const PRINT_TOL: f64 = 0.01;
/// Standard errors allowed for simulated cells.
pub const SE_MULTIPLE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCheck {
    pub golden: GoldenCell,
    pub computed: f64,
    /// Zero for deterministic cells.
    pub std_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReproduction {
    pub table: TableId,
    pub num_draws: usize,
    pub seed: u64,
    pub cells: Vec<CellCheck>,
}

impl TableReproduction {
    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellCheck> {
        self.cells.iter().filter(|c| !c.passed)
    }
}

/// Computed value and standard error for one cell.
type Lookup<'a> = dyn Fn(&GoldenCell) -> Result<Estimate> + 'a;

fn check(cells: Vec<GoldenCell>, lookup: &Lookup<'_>) -> Result<Vec<CellCheck>> {
    cells
        .into_iter()
        .map(|golden| {
            let est = lookup(&golden)?;
            let tolerance = if est.std_err > 0.0 {
                PRINT_TOL.max(SE_MULTIPLE * est.std_err)
            } else {
                PRINT_TOL
            };
            let passed = (est.value - golden.value).abs() <= tolerance;
            Ok(CellCheck { golden, computed: est.value, std_err: est.std_err, tolerance, passed })
        })
        .collect()
}

fn equilibrium_column(e: &Experiment, column: &str, k: usize) -> Result<Estimate> {
    let p = &e.solution.profile;
    let q = &e.solution.equilibrium;
    let v = match column {
        "y" => q.y0[k],
        "l" => q.labor[k],
        "c" => q.c0[k],
        "p/w" => q.p_over_w[k],
        "zeta" => p.zeta[k],
        "xi" => p.xi[k],
        "v0" => e.leontief.centrality()[k],
        "v_zeta" => p.discounted_centrality[k],
        other => return Err(Error::InvalidArgument(format!("unknown column {other}"))),
    };
    Ok(Estimate::exact(v))
}

fn report_column(r: &SimulationReport, column: &str, k: usize) -> Result<Estimate> {
    match column {
        "profit_sd" => Ok(r.profit_sd[k]),
        "default_prob" => Ok(r.default_prob[k]),
        other => Err(Error::InvalidArgument(format!("unknown column {other}"))),
    }
}

/// Recomputes a table and compares every cell with its published value.
pub fn reproduce(table: TableId, num_draws: usize, seed: u64) -> Result<TableReproduction> {
    let analytic = ExpectationEngine::analytic();
    let config = CampaignConfig { num_draws, seed, bins: DEFAULT_BINS };
    let topology = match table {
        TableId::LineQuantities | TableId::LineFinance | TableId::LineProfits | TableId::LineCascades => Topology::Line,
        _ => Topology::Cycle,
    };
    let cells = golden(table);
    let thetas = [0.5, 1.0];
    let solved: Vec<Experiment> =
        thetas.iter().map(|t| Experiment::solve(topology, *t, &analytic)).collect::<Result<_>>()?;
    let by_theta = |theta: Option<f64>| -> usize { usize::from(theta == Some(1.0)) };

    let checks = match table {
        TableId::LineQuantities | TableId::LineFinance | TableId::CycleQuantities | TableId::CycleFinance => {
            check(cells, &|g| equilibrium_column(&solved[by_theta(g.theta)], g.column, g.sector - 1))?
        }
        TableId::LineProfits | TableId::CycleProfits => {
            let reports: Vec<SimulationReport> =
                solved.iter().map(|e| e.campaign(config)).collect::<Result<_>>()?;
            check(cells, &|g| report_column(&reports[by_theta(g.theta)], g.column, g.sector - 1))?
        }
        TableId::LineCascades | TableId::CycleCascades => {
            let report = solved[1].campaign(config)?;
            check(cells, &|g| report_column(&report, g.column, g.sector - 1))?
        }
        TableId::CycleMinusLine => {
            let line = Experiment::solve(Topology::Line, 1.0, &analytic)?;
            let line_report = line.campaign(config)?;
            let cycle_report = solved[1].campaign(config)?;
            let delta = compare_leverage(&line_report, &cycle_report)?;
            check(cells, &|g| {
                let d = &delta[g.sector - 1];
                Ok(match g.column {
                    "zeta" => Estimate::exact(d.zeta),
                    "xi" => Estimate::exact(d.xi),
                    "y" => Estimate::exact(d.y),
                    "c" => Estimate::exact(d.c),
                    _ => d.default_prob,
                })
            })?
        }
    };
    Ok(TableReproduction { table, num_draws, seed, cells: checks })
}

impl TableReproduction {
    /// Fixed-width text rendering, one line per cell, failing cells marked.
    pub fn render(&self) -> String {
        let mut out = format!(
            "table {}  draws={}  seed={}\n{:>6} {:>6} {:>12} {:>12} {:>10} {:>10} {:>10}  status\n",
            self.table.label(),
            self.num_draws,
            self.seed,
            "theta",
            "sector",
            "column",
            "computed",
            "published",
            "diff",
            "tol"
        );
        for c in &self.cells {
            let theta = c.golden.theta.map_or_else(|| "-".to_string(), |t| format!("{t}"));
            out.push_str(&format!(
                "{:>6} {:>6} {:>12} {:>12.4} {:>10.4} {:>+10.4} {:>10.4}  {}\n",
                theta,
                c.golden.sector,
                c.golden.column,
                c.computed,
                c.golden.value,
                c.computed - c.golden.value,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" }
            ));
        }
        let failed = self.failures().count();
        out.push_str(&format!("{} of {} cells within tolerance\n", self.cells.len() - failed, self.cells.len()));
        out
    }
}
