// SPDX-License-Identifier: Apache-2.0
//! Maximal equilibrium, shock-contingent realizations and their diagnostics.

use serde::Serialize;

use crate::debt::{solve_zeta_all, DebtProfile, ZetaSolution};
use crate::economy::{Economy, Leontief};
use crate::engine::{ConditionalLaw, Estimate};
use crate::error::{Error, Result};
use crate::shocks::NormalizedShocks;

/// The wage is the numeraire.
pub const WAGE: f64 = 1.0;

/// Quantities and prices decided before shocks realize.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub wage: f64,
    /// Maximal productions.
    pub y0: Vec<f64>,
    /// Maximal intermediate orders, `z0[j][k]` of product `j` by sector `k`.
    pub z0: Vec<Vec<f64>>,
    pub labor: Vec<f64>,
    /// Maximal consumption.
    pub c0: Vec<f64>,
    pub p_over_w: Vec<f64>,
    /// Price relative to the consumption-bundle price `Π_j p_j^{γ_j}`.
    pub p_rel: Vec<f64>,
    pub rates: Vec<f64>,
    /// `E[e^{ρ_k} | φ]`, which pins prices and normalized shocks.
    pub expected_exp_rho: Vec<f64>,
    /// Sectors whose loss multiplier `w v^ζ_k` exceeds one.
    pub amplifies: Vec<bool>,
    /// Both sides of the wage equation `w = Π p^γ Π E[e^ρ]^γ e^{-Σ v⁰ζ}`.
    pub wage_identity: (f64, f64),
}

impl Equilibrium {
    pub fn new(
        econ: &Economy,
        leontief: &Leontief,
        profile: &DebtProfile,
        expected_exp_rho: &[f64],
    ) -> Result<Self> {
        let n = econ.n();
        if profile.n() != n || leontief.n() != n {
            return Err(Error::InconsistentProfile(format!(
                "profile has {} sectors, economy has {n}",
                profile.n()
            )));
        }
        if expected_exp_rho.len() != n || expected_exp_rho.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::InconsistentProfile(
                "expected exponential shocks must be positive, one per sector".into(),
            ));
        }
        let v = &profile.discounted_centrality;
        let zeta = &profile.zeta;
        let xi = &profile.xi;
        let gamma = econ.consumption_weights();
        let beta = econ.labor_shares();
        let v0 = leontief.centrality();

        let y0 = (0..n).map(|k| v[k] * (-xi[k]).exp()).collect();
        let z0 = (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| v[k] * econ.input_share(j, k) * (-zeta[k] - xi[j]).exp())
                    .collect()
            })
            .collect();
        let labor = (0..n).map(|k| v[k] * beta[k] * (-zeta[k]).exp()).collect();
        let c0 = (0..n).map(|k| gamma[k] * (-xi[k]).exp() / profile.psi).collect();
        let p_over_w: Vec<f64> =
            (0..n).map(|k| xi[k].exp() / expected_exp_rho[k]).collect();
        let log_bundle: f64 = (0..n).map(|j| gamma[j] * (WAGE * p_over_w[j]).ln()).sum();
        let p_rel = p_over_w.iter().map(|p| ((WAGE * p).ln() - log_bundle).exp()).collect();
        let debt_drag: f64 = v0.iter().zip(zeta).map(|(a, b)| a * b).sum();
        let log_expect: f64 = (0..n).map(|j| gamma[j] * expected_exp_rho[j].ln()).sum();
        let wage_identity = (WAGE, (log_bundle + log_expect - debt_drag).exp());

        Ok(Self {
            wage: WAGE,
            y0,
            z0,
            labor,
            c0,
            p_over_w,
            p_rel,
            rates: profile.rates.clone(),
            expected_exp_rho: expected_exp_rho.to_vec(),
            amplifies: v.iter().map(|vk| WAGE * vk > 1.0).collect(),
            wage_identity,
        })
    }

    pub fn n(&self) -> usize {
        self.y0.len()
    }

    /// Largest residual of labor and maximal goods market clearing.
    pub fn clearing_residual(&self) -> f64 {
        let labor = (self.labor.iter().sum::<f64>() - 1.0).abs();
        let goods = (0..self.n())
            .map(|k| (self.y0[k] - self.z0[k].iter().sum::<f64>() - self.c0[k]).abs())
            .fold(0.0, f64::max);
        labor.max(goods)
    }
}

/// Outcomes once the shock `η` is realized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    pub eta: Vec<f64>,
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub y: Vec<f64>,
    /// `z[j][k]`: product `j` delivered to sector `k`.
    pub z: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub profit: Vec<f64>,
    pub assets: Vec<f64>,
    pub liabilities: Vec<f64>,
    pub default_cost: Vec<f64>,
    pub recovery: Vec<f64>,
    pub bank_profit: Vec<f64>,
    pub budget: f64,
    pub welfare: f64,
    /// Sales over total consumption; `None` if the normalizer underflows.
    pub domar: Option<Vec<f64>>,
}

impl Realization {
    pub fn new(
        econ: &Economy,
        leontief: &Leontief,
        profile: &DebtProfile,
        equil: &Equilibrium,
        eta: &[f64],
    ) -> Result<Self> {
        let shocks = NormalizedShocks::new(econ, leontief, &equil.expected_exp_rho, eta)?;
        Ok(Self::from_shocks(econ, leontief, profile, equil, eta, shocks))
    }

    /// Realization with normalized shocks already computed.
    pub fn from_shocks(
        econ: &Economy,
        leontief: &Leontief,
        profile: &DebtProfile,
        equil: &Equilibrium,
        eta: &[f64],
        shocks: NormalizedShocks,
    ) -> Self {
        let n = econ.n();
        let NormalizedShocks { rho, tau, epsilon } = shocks;
        let w = equil.wage;
        let v = &profile.discounted_centrality;
        let zeta = &profile.zeta;
        let theta = econ.leverage();
        let growth: Vec<f64> = rho.iter().map(|r| r.exp()).collect();

        let y = (0..n).map(|k| growth[k] * equil.y0[k]).collect();
        let z = (0..n)
            .map(|j| (0..n).map(|k| growth[j] * equil.z0[j][k]).collect())
            .collect();
        let c = (0..n).map(|k| growth[k] * equil.c0[k]).collect();
        let sales: Vec<f64> = v.iter().map(|vk| w * vk).collect();
        let profit = (0..n).map(|k| (tau[k] - epsilon[k]) * sales[k]).collect();
        let assets: Vec<f64> = (0..n).map(|k| sales[k] * tau[k]).collect();
        let liabilities: Vec<f64> =
            (0..n).map(|k| epsilon[k] * sales[k] * (-zeta[k]).exp()).collect();
        // (1 + r)θ written without dividing by θ.
        let owed: Vec<f64> = (0..n).map(|k| theta[k] + zeta[k].exp_m1()).collect();
        let default_cost: Vec<f64> = (0..n)
            .map(|k| {
                let cover = (assets[k] - (1.0 - theta[k]) * liabilities[k]).max(0.0);
                (owed[k] * liabilities[k] - cover).max(0.0)
            })
            .collect();
        let recovery = (0..n).map(|k| owed[k] * liabilities[k] - default_cost[k]).collect();
        let bank_profit =
            (0..n).map(|k| zeta[k].exp_m1() * liabilities[k] - default_cost[k]).collect();
        let gamma = econ.consumption_weights();
        let shock_mass: f64 = (0..n).map(|j| tau[j] * gamma[j]).sum();
        let budget = w / profile.psi * shock_mass;
        let v0 = leontief.centrality();
        let exposure: f64 = v0.iter().zip(eta).map(|(a, b)| a * b).sum();
        let drag: f64 = v0.iter().zip(zeta).map(|(a, b)| a * b).sum();
        let welfare = (exposure - drag).exp() / profile.psi;
        let domar = (shock_mass > f64::MIN_POSITIVE).then(|| {
            (0..n).map(|k| profile.psi * v[k] * tau[k] / shock_mass).collect()
        });

        Self {
            eta: eta.to_vec(),
            rho,
            tau,
            epsilon,
            y,
            z,
            c,
            profit,
            assets,
            liabilities,
            default_cost,
            recovery,
            bank_profit,
            budget,
            welfare,
            domar,
        }
    }

    pub fn n(&self) -> usize {
        self.tau.len()
    }

    /// Default event `τ_k < ε_k`.
    pub fn defaults(&self, k: usize) -> bool {
        self.tau[k] < self.epsilon[k]
    }

    /// Largest residual of realized goods clearing.
    pub fn clearing_residual(&self) -> f64 {
        (0..self.n())
            .map(|k| (self.y[k] - self.z[k].iter().sum::<f64>() - self.c[k]).abs())
            .fold(0.0, f64::max)
    }

    /// Consumption utility `χ Π c_k^{γ_k}` evaluated directly.
    pub fn direct_utility(&self, econ: &Economy) -> f64 {
        let log: f64 = econ
            .consumption_weights()
            .iter()
            .zip(&self.c)
            .filter(|(g, _)| **g > 0.0)
            .map(|(g, c)| g * c.ln())
            .sum();
        econ.preference_constant() * log.exp()
    }

    /// Household spending `Σ p_k c_k`.
    pub fn spending(&self, equil: &Equilibrium) -> f64 {
        (0..self.n()).map(|k| equil.wage * equil.p_over_w[k] * self.c[k]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HultenRow {
    /// Marginal welfare effect of the sector's shock.
    pub centrality: f64,
    pub domar: f64,
    pub gap: f64,
    /// `τ_k / Σ_j τ_j γ_j < v⁰_k / (ψ v^ζ_k)`: the Domar weight understates
    /// the welfare effect.
    pub understated: bool,
}

pub fn hulten_diagnostics(
    realization: &Realization,
    profile: &DebtProfile,
    centrality: &[f64],
    gamma: &[f64],
) -> Vec<HultenRow> {
    let n = realization.n();
    let shock_mass: f64 = (0..n).map(|j| realization.tau[j] * gamma[j]).sum();
    (0..n)
        .map(|k| {
            let domar = realization.domar.as_ref().map_or(f64::NAN, |d| d[k]);
            let lhs = realization.tau[k] / shock_mass;
            let rhs = centrality[k] / (profile.psi * profile.discounted_centrality[k]);
            HultenRow {
                centrality: centrality[k],
                domar,
                gap: centrality[k] - domar,
                understated: lhs < rhs,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelfareBound {
    /// Realized welfare.
    pub welfare: f64,
    /// Frictionless welfare `e^{Σ v⁰η}`.
    pub frictionless: f64,
    /// `Σ v⁰η - log U`.
    pub slack: f64,
}

pub fn welfare_bound_check(realization: &Realization, centrality: &[f64]) -> WelfareBound {
    let exposure: f64 = centrality.iter().zip(&realization.eta).map(|(a, b)| a * b).sum();
    WelfareBound {
        welfare: realization.welfare,
        frictionless: exposure.exp(),
        slack: exposure - realization.welfare.ln(),
    }
}

/// Everything computed for one conditional law of the shocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub expected_exp_rho: Vec<Estimate>,
    pub zeta: Vec<ZetaSolution>,
    pub profile: DebtProfile,
    pub equilibrium: Equilibrium,
}

/// Solves cost of debt, debt profile and maximal equilibrium.
pub fn solve(econ: &Economy, leontief: &Leontief, law: &ConditionalLaw) -> Result<Solution> {
    let expected_exp_rho = law.expected_exp_rho_with_err(leontief);
    let expected: Vec<f64> = expected_exp_rho.iter().map(|e| e.value).collect();
    let zeta = solve_zeta_all(econ, leontief, law, &expected)?;
    let zeta_values: Vec<f64> = zeta.iter().map(|z| z.zeta).collect();
    let profile = DebtProfile::new(econ, leontief, &zeta_values)?;
    let equilibrium = Equilibrium::new(econ, leontief, &profile, &expected)?;
    Ok(Solution { expected_exp_rho, zeta, profile, equilibrium })
}

/// One point of a leverage sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub zeta: Vec<f64>,
    pub xi: Vec<f64>,
    pub labor: Vec<f64>,
    pub c0: Vec<f64>,
    pub p_over_w: Vec<f64>,
    pub p_rel: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticsReport {
    pub sector: usize,
    pub points: Vec<SweepPoint>,
    /// Every failed monotonicity claim, naming sectors one-based.
    pub violations: Vec<String>,
}

impl StaticsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tolerance for weak monotonicity along a leverage sweep.
pub const STATICS_TOL: f64 = 1e-9;

/// Re-solves the economy along `theta_grid` for sector `o` and checks the
/// monotone responses of debt costs, labor, consumption and prices.
pub fn leverage_comparative_statics(
    econ: &Economy,
    leontief: &Leontief,
    law: &ConditionalLaw,
    o: usize,
    theta_grid: &[f64],
) -> Result<StaticsReport> {
    econ.check_sector(o)?;
    if theta_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("leverage grid must be ascending".into()));
    }
    let points = theta_grid
        .iter()
        .map(|&theta| {
            let e = econ.with_sector_leverage(o, theta)?;
            let s = solve(&e, leontief, law)?;
            Ok(SweepPoint {
                theta,
                zeta: s.profile.zeta.clone(),
                xi: s.profile.xi.clone(),
                labor: s.equilibrium.labor.clone(),
                c0: s.equilibrium.c0.clone(),
                p_over_w: s.equilibrium.p_over_w.clone(),
                p_rel: s.equilibrium.p_rel.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = econ.n();
    let v0 = leontief.centrality();
    let downstream = |k: usize| k == o || leontief.is_customer(k, o);
    let upstream = |k: usize| k == o || leontief.supplies(k, o);
    let mut violations = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let span = format!("theta {} -> {}", a.theta, b.theta);
        for k in 0..n {
            let dxi = b.xi[k] - a.xi[k];
            if downstream(k) && dxi < -STATICS_TOL {
                violations.push(format!("{span}: total cost of debt of sector {} decreased", k + 1));
            }
            if !downstream(k) && dxi.abs() > STATICS_TOL {
                violations.push(format!("{span}: total cost of debt of sector {} moved", k + 1));
            }
            if !upstream(k) && b.labor[k] - a.labor[k] < -STATICS_TOL {
                violations.push(format!("{span}: labor of non-supplier {} decreased", k + 1));
            }
            if !downstream(k) && b.c0[k] - a.c0[k] < -STATICS_TOL {
                violations.push(format!("{span}: consumption of non-customer {} decreased", k + 1));
            }
            if downstream(k) && b.p_over_w[k] - a.p_over_w[k] < -STATICS_TOL * a.p_over_w[k] {
                violations.push(format!("{span}: price of sector {} decreased", k + 1));
            }
            let drift = leontief.get(k, o) - v0[o];
            let dp = b.p_rel[k] - a.p_rel[k];
            let tol = STATICS_TOL * a.p_rel[k];
            let wrong = if drift > 0.0 {
                dp < -tol
            } else if drift < 0.0 {
                dp > tol
            } else {
                dp.abs() > tol
            };
            if wrong {
                violations.push(format!("{span}: relative price of sector {} moved against sign {drift:+.3e}", k + 1));
            }
        }
        let some_upstream_falls =
            (0..n).filter(|&k| upstream(k)).any(|k| b.labor[k] - a.labor[k] <= STATICS_TOL);
        if !some_upstream_falls {
            violations.push(format!("{span}: labor rose at sector {} and all its suppliers", o + 1));
        }
    }
    Ok(StaticsReport { sector: o, points, violations })
}
