// SPDX-License-Identifier: Apache-2.0
//! Static description of the production network and its Leontief structure.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance for `Σγ = 1`.
pub const PREFERENCE_TOL: f64 = 1e-12;
/// Tolerance for a user supplied labor share vector and for column sums.
pub const LABOR_TOL: f64 = 1e-9;
const POWER_ITERATIONS: usize = 1000;
const POWER_TOL: f64 = 1e-10;
const PRODUCTIVITY_MARGIN: f64 = 1e-9;

/// An `n`-sector economy with Cobb-Douglas technologies and preferences.
///
/// `input_share(j, k)` is the weight of product `j` in the technology of
/// sector `k`; columns sum to one minus the labor share.
#[derive(Debug, Clone, PartialEq)]
pub struct Economy {
    label: Option<String>,
    io: DMatrix<f64>,
    labor: Vec<f64>,
    consumption: Vec<f64>,
    leverage: Vec<f64>,
}

impl Economy {
    /// Validates and builds an economy. `labor`, when given, must agree with
    /// one minus the column sums of `io` within [`LABOR_TOL`].
    pub fn new(
        io: DMatrix<f64>,
        consumption: Vec<f64>,
        leverage: Vec<f64>,
        labor: Option<Vec<f64>>,
        label: Option<String>,
    ) -> Result<Self> {
        let n = io.nrows();
        if n == 0 {
            return Err(Error::DimensionMismatch("economy needs at least one sector".into()));
        }
        if io.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "input-output matrix is {}x{}, expected a square matrix",
                io.nrows(),
                io.ncols()
            )));
        }
        for (name, v) in [("gamma", &consumption), ("theta", &leverage)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has length {}, expected {n}",
                    v.len()
                )));
            }
        }
        for j in 0..n {
            for k in 0..n {
                let a = io[(j, k)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::NegativeEntry(format!("A[{j}][{k}] = {a}")));
                }
            }
        }
        if let Some(k) = consumption.iter().position(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::NegativeEntry(format!("gamma[{k}] = {}", consumption[k])));
        }
        let total: f64 = consumption.iter().sum();
        if (total - 1.0).abs() > PREFERENCE_TOL {
            return Err(Error::PreferenceSumViolation(total));
        }
        if let Some(k) = leverage.iter().position(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::LeverageOutOfRange { sector: k, value: leverage[k] });
        }

        let derived: Vec<f64> = (0..n).map(|k| 1.0 - io.column(k).sum()).collect();
        if let Some(k) = derived.iter().position(|b| *b < -LABOR_TOL) {
            return Err(Error::ColumnSumViolation { sector: k, total: 1.0 - derived[k] });
        }
        let derived: Vec<f64> = derived.into_iter().map(|b| b.max(0.0)).collect();
        if let Some(given) = labor {
            if given.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "beta has length {}, expected {n}",
                    given.len()
                )));
            }
            if let Some(k) = given.iter().position(|b| !b.is_finite() || *b < 0.0) {
                return Err(Error::NegativeEntry(format!("beta[{k}] = {}", given[k])));
            }
            if let Some(k) = (0..n).find(|&k| (given[k] - derived[k]).abs() > LABOR_TOL) {
                return Err(Error::ColumnSumViolation {
                    sector: k,
                    total: io.column(k).sum() + given[k],
                });
            }
        }

        let radius = spectral_radius(&io);
        if radius >= 1.0 - PRODUCTIVITY_MARGIN {
            return Err(Error::SpectralRadiusNotSubunit(radius));
        }

        Ok(Self { label, io, labor: derived, consumption, leverage })
    }

    /// Builds from a row-major nested vector.
    pub fn from_rows(
        rows: &[Vec<f64>],
        consumption: Vec<f64>,
        leverage: Vec<f64>,
    ) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?, consumption, leverage, None, None)
    }

    pub fn n(&self) -> usize {
        self.io.nrows()
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Weight of product `j` in the technology of sector `k`.
    pub fn input_share(&self, j: usize, k: usize) -> f64 {
        self.io[(j, k)]
    }

    pub fn io_matrix(&self) -> &DMatrix<f64> {
        &self.io
    }

    pub fn io_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|j| self.io.row(j).iter().copied().collect()).collect()
    }

    pub fn labor_shares(&self) -> &[f64] {
        &self.labor
    }

    pub fn consumption_weights(&self) -> &[f64] {
        &self.consumption
    }

    pub fn leverage(&self) -> &[f64] {
        &self.leverage
    }

    /// Same network with a new leverage vector.
    pub fn with_leverage(&self, leverage: Vec<f64>) -> Result<Self> {
        Self::new(
            self.io.clone(),
            self.consumption.clone(),
            leverage,
            None,
            self.label.clone(),
        )
    }

    /// Same network with leverage of one sector replaced.
    pub fn with_sector_leverage(&self, sector: usize, theta: f64) -> Result<Self> {
        self.check_sector(sector)?;
        let mut leverage = self.leverage.clone();
        leverage[sector] = theta;
        self.with_leverage(leverage)
    }

    pub fn check_sector(&self, sector: usize) -> Result<()> {
        if sector < self.n() {
            Ok(())
        } else {
            Err(Error::SectorOutOfRange { index: sector, len: self.n() })
        }
    }

    /// Technology normalization constants so that unit cost equals the
    /// geometric mean of input prices.
    pub fn technology_constants(&self) -> Vec<f64> {
        (0..self.n())
            .map(|k| {
                let log_sum = neg_x_log_x(self.labor[k])
                    + (0..self.n()).map(|j| neg_x_log_x(self.io[(j, k)])).sum::<f64>();
                log_sum.exp()
            })
            .collect()
    }

    /// Normalization constant of the consumption aggregator.
    pub fn preference_constant(&self) -> f64 {
        self.consumption.iter().map(|g| neg_x_log_x(*g)).sum::<f64>().exp()
    }

    /// `path[j][k]` is true when there is a directed path of length at least
    /// one from `j` to `k` along positive input shares.
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.n();
        let mut reach: Vec<Vec<bool>> =
            (0..n).map(|j| (0..n).map(|k| self.io[(j, k)] > 0.0).collect()).collect();
        for m in 0..n {
            for j in 0..n {
                if reach[j][m] {
                    for k in 0..n {
                        if reach[m][k] {
                            reach[j][k] = true;
                        }
                    }
                }
            }
        }
        reach
    }
}

/// `-x log x` with the convention `0 log 0 = 0`.
fn neg_x_log_x(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some(j) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "row {j} of A has length {}, expected {n}",
            rows[j].len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |j, k| rows[j][k]))
}

/// Perron root of a non-negative matrix by power iteration on `I + A`,
/// which is aperiodic even when `A` is a cycle.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let shifted = DMatrix::<f64>::identity(n, n) + a;
    let mut x = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = f64::INFINITY;
    for _ in 0..POWER_ITERATIONS {
        let y = &shifted * &x;
        let norm = y.iter().map(|v| v.abs()).sum::<f64>();
        if norm == 0.0 || !norm.is_finite() {
            return if norm == 0.0 { 0.0 } else { f64::INFINITY };
        }
        let next = norm - 1.0;
        x = y / norm;
        if (next - estimate).abs() < POWER_TOL {
            return next.max(0.0);
        }
        estimate = next;
    }
    estimate.max(0.0)
}

/// Leontief inverse `(I - Aᵀ)⁻¹` and the consumption-weighted centrality.
///
/// `inverse(k, j)` is the total elasticity of sector `k`'s output to a
/// productivity shock in sector `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Leontief {
    inverse: DMatrix<f64>,
    centrality: Vec<f64>,
    reach: Vec<Vec<bool>>,
}

impl Leontief {
    pub fn new(econ: &Economy) -> Result<Self> {
        let n = econ.n();
        let system = DMatrix::<f64>::identity(n, n) - econ.io_matrix().transpose();
        let mut inverse = system.lu().try_inverse().ok_or(Error::SingularSystem)?;
        let reach = econ.reachability();
        // Entries without a supporting walk are exact: zero off the diagonal,
        // one on it.
        for k in 0..n {
            for j in 0..n {
                if !reach[j][k] {
                    inverse[(k, j)] = if j == k { 1.0 } else { 0.0 };
                }
            }
        }
        if inverse.iter().any(|v| !v.is_finite() || *v < -1e-12) {
            return Err(Error::SpectralRadiusNotSubunit(spectral_radius(econ.io_matrix())));
        }
        inverse.iter_mut().for_each(|v| *v = v.max(0.0));
        let gamma = econ.consumption_weights();
        let centrality = (0..n)
            .map(|k| (0..n).map(|j| gamma[j] * inverse[(j, k)]).sum())
            .collect();
        Ok(Self { inverse, centrality, reach })
    }

    pub fn n(&self) -> usize {
        self.inverse.nrows()
    }

    /// `L[k][j]`.
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.inverse[(k, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|k| self.inverse.row(k).iter().copied().collect()).collect()
    }

    /// Consumption-weighted centrality `v⁰ = Lᵀγ`; equals the Domar weights
    /// of the frictionless economy.
    pub fn centrality(&self) -> &[f64] {
        &self.centrality
    }

    /// `L x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|k| (0..self.n()).map(|j| self.inverse[(k, j)] * x[j]).sum())
            .collect()
    }

    /// Does sector `j` supply sector `k`, directly or indirectly?
    pub fn supplies(&self, j: usize, k: usize) -> bool {
        self.reach[j][k]
    }

    /// Is sector `j` a direct or indirect customer of sector `k`?
    pub fn is_customer(&self, j: usize, k: usize) -> bool {
        self.reach[k][j]
    }

    /// `supplier[j][k]` as in [`Leontief::supplies`].
    pub fn supplier_matrix(&self) -> Vec<Vec<bool>> {
        self.reach.clone()
    }

    /// `customer[j][k]` as in [`Leontief::is_customer`].
    pub fn customer_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.n();
        (0..n).map(|j| (0..n).map(|k| self.reach[k][j]).collect()).collect()
    }
}
