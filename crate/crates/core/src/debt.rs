// SPDX-License-Identifier: Apache-2.0
//! Cost of debt and the debt-discounted network objects.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::economy::{Economy, Leontief};
use crate::engine::{ConditionalLaw, SectorLaw};
use crate::error::{Error, Result};

pub const MAX_BISECTIONS: usize = 200;
pub const X_TOL: f64 = 1e-12;
/// Relative widening of the upper bracket end.
const BRACKET_SLACK: f64 = 1e-9;
/// Rounding slack tolerated on the sign of `f` at the bracket ends.
const SIGN_SLACK: f64 = 1e-12;

/// Solution of the bank zero-profit equation for one sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZetaSolution {
    /// Primitive cost of debt `ζ = log(1 + rθ)`.
    pub zeta: f64,
    /// `E[clamp(e^ζ τ, (1-θ)ε, e^ζ ε)] - 1` at the returned root.
    pub residual: f64,
    pub iterations: usize,
}

impl ZetaSolution {
    fn zero(residual: f64) -> Self {
        Self { zeta: 0.0, residual, iterations: 0 }
    }
}

/// `f(x, θ) = E[clamp(xτ, (1-θ)ε, xε)] - 1`, strictly increasing in `x ≥ 1`.
pub fn zero_profit_gap(law: &SectorLaw, x: f64, theta: f64) -> f64 {
    law.clamp_mean(x, theta) - 1.0
}

/// Bisects `f(·, θ)` on `[1, (1 + 1e-9) / E[min(ε, τ)]]`.
pub fn solve_zeta(law: &SectorLaw, theta: f64) -> Result<ZetaSolution> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("leverage {theta} outside [0, 1]")));
    }
    if theta == 0.0 {
        return Ok(ZetaSolution::zero(0.0));
    }
    let floor = law.min_mean();
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::BracketFailure { f_lo: f64::NAN, f_hi: f64::NAN });
    }
    let f = |x: f64| zero_profit_gap(law, x, theta);
    let (mut lo, mut hi) = (1.0, (1.0 + BRACKET_SLACK) / floor);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo >= 0.0 {
        return if f_lo <= SIGN_SLACK {
            Ok(ZetaSolution::zero(f_lo))
        } else {
            Err(Error::BracketFailure { f_lo, f_hi })
        };
    }
    if f_hi < 0.0 {
        return if f_hi >= -SIGN_SLACK {
            Ok(ZetaSolution { zeta: hi.ln(), residual: f_hi, iterations: 0 })
        } else {
            Err(Error::BracketFailure { f_lo, f_hi })
        };
    }
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS && hi - lo > X_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let x = 0.5 * (lo + hi);
    Ok(ZetaSolution { zeta: x.ln(), residual: f(x), iterations })
}

/// Independent per-sector solves under a common conditional law.
pub fn solve_zeta_all(
    econ: &Economy,
    leontief: &Leontief,
    law: &ConditionalLaw,
    expected_exp_rho: &[f64],
) -> Result<Vec<ZetaSolution>> {
    (0..econ.n())
        .into_par_iter()
        .map(|k| {
            let theta = econ.leverage()[k];
            if theta == 0.0 {
                return Ok(ZetaSolution::zero(0.0));
            }
            solve_zeta(&law.sector_law(econ, leontief, expected_exp_rho, k)?, theta)
        })
        .collect()
}

/// Debt-discounted network objects for a given cost-of-debt vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DebtProfile {
    pub zeta: Vec<f64>,
    /// Total cost of debt `ξ = Lζ`.
    pub xi: Vec<f64>,
    /// `(I - e^{-[ζ]}Aᵀ)⁻¹`, row-major.
    pub discounted_leontief: Vec<Vec<f64>>,
    pub psi: f64,
    /// Discounted centrality `v^ζ`.
    pub discounted_centrality: Vec<f64>,
    /// Interest rates `r_k = (e^{ζ_k} - 1)/θ_k`, zero when `θ_k = 0`.
    pub rates: Vec<f64>,
}

impl DebtProfile {
    pub fn new(econ: &Economy, leontief: &Leontief, zeta: &[f64]) -> Result<Self> {
        let n = econ.n();
        if zeta.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "cost of debt has length {}, expected {n}",
                zeta.len()
            )));
        }
        if let Some(z) = zeta.iter().find(|z| !(z.is_finite() && **z >= 0.0)) {
            return Err(Error::InvalidArgument(format!("cost of debt {z} must be >= 0")));
        }
        let l_zeta = discounted_leontief(econ, zeta)?;
        let gamma = econ.consumption_weights();
        let beta = econ.labor_shares();
        let psi: f64 = (0..n)
            .flat_map(|j| (0..n).map(move |k| (j, k)))
            .map(|(j, k)| gamma[j] * l_zeta[(j, k)] * beta[k] * (-zeta[k]).exp())
            .sum();
        let discounted_centrality =
            (0..n).map(|k| (0..n).map(|j| l_zeta[(j, k)] * gamma[j]).sum::<f64>() / psi).collect();
        let theta = econ.leverage();
        let rates = (0..n)
            .map(|k| if theta[k] > 0.0 { zeta[k].exp_m1() / theta[k] } else { 0.0 })
            .collect();
        Ok(Self {
            zeta: zeta.to_vec(),
            xi: leontief.apply(zeta),
            discounted_leontief: (0..n).map(|j| l_zeta.row(j).iter().copied().collect()).collect(),
            psi,
            discounted_centrality,
            rates,
        })
    }

    pub fn n(&self) -> usize {
        self.zeta.len()
    }

    /// `log ψ(ζ) + Σ_k v⁰_k ζ_k`, non-negative and zero at `ζ = 0`.
    pub fn welfare_slack(&self, centrality: &[f64]) -> f64 {
        self.psi.ln() + centrality.iter().zip(&self.zeta).map(|(v, z)| v * z).sum::<f64>()
    }
}

/// `(I - e^{-[ζ]}Aᵀ)⁻¹` whose `(j, k)` entry is `L^ζ_{jk}`.
pub fn discounted_leontief(econ: &Economy, zeta: &[f64]) -> Result<DMatrix<f64>> {
    let n = econ.n();
    let system = DMatrix::from_fn(n, n, |j, k| {
        f64::from(u8::from(j == k)) - (-zeta[j]).exp() * econ.input_share(k, j)
    });
    system.lu().try_inverse().ok_or(Error::SingularSystem)
}

/// Discounted network objects rebuilt from sums over supply walks, with
/// a bound on the truncated tail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkExpansion {
    pub max_length: usize,
    pub psi_matrix: f64,
    pub psi_walk: f64,
    pub psi_tail_bound: f64,
    /// Truncated estimate of `L^ζ`, row-major.
    pub discounted_leontief_walk: Vec<Vec<f64>>,
    /// Entrywise tail bound for `discounted_leontief_walk`.
    pub entry_tail_bound: Vec<Vec<f64>>,
    /// Interval guaranteed to contain each `v^ζ_k`.
    pub centrality_bounds: Vec<(f64, f64)>,
    /// Discount contraction factor; the tail is geometric in it.
    pub contraction: f64,
}

/// Sums walk weights `Π A · Π e^{-ζ}` over all walks with at most
/// `max_length` steps, without inverting any matrix.
pub fn walk_expansion_check(econ: &Economy, zeta: &[f64], max_length: usize) -> Result<WalkExpansion> {
    let n = econ.n();
    if zeta.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "cost of debt has length {}, expected {n}",
            zeta.len()
        )));
    }
    let discount: Vec<f64> = zeta.iter().map(|z| (-z).exp()).collect();
    let step = |i: usize, k: usize| econ.input_share(k, i) * discount[k];

    // layer[j][k]: weight of walks from j to k with exactly m steps.
    let mut layer: Vec<Vec<f64>> =
        (0..n).map(|j| (0..n).map(|k| if j == k { discount[j] } else { 0.0 }).collect()).collect();
    let mut total = layer.clone();
    for _ in 0..max_length {
        let next: Vec<Vec<f64>> = layer
            .iter()
            .map(|row| (0..n).map(|k| (0..n).map(|i| row[i] * step(i, k)).sum()).collect())
            .collect();
        for (t, r) in total.iter_mut().zip(&next) {
            for (a, b) in t.iter_mut().zip(r) {
                *a += b;
            }
        }
        layer = next;
    }

    let gamma = econ.consumption_weights();
    let beta = econ.labor_shares();
    let contraction = (0..n).map(|i| (0..n).map(|k| step(i, k)).sum::<f64>()).fold(0.0, f64::max);
    let geometric = if contraction < 1.0 {
        contraction.powi(max_length as i32 + 1) / (1.0 - contraction)
    } else {
        f64::INFINITY
    };
    let weighted_start: f64 = (0..n).map(|j| gamma[j] * discount[j]).sum();
    let beta_max = beta.iter().copied().fold(0.0, f64::max);

    let psi_walk: f64 = (0..n)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .map(|(j, k)| gamma[j] * total[j][k] * beta[k])
        .sum();
    let psi_tail_bound = beta_max * weighted_start * geometric;
    let l_walk: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|k| total[j][k] / discount[k]).collect())
        .collect();
    let entry_tail_bound: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|k| discount[j] / discount[k] * geometric).collect())
        .collect();
    let centrality_bounds = (0..n)
        .map(|k| {
            let numerator: f64 = (0..n).map(|j| gamma[j] * l_walk[j][k]).sum();
            let numerator_tail = weighted_start / discount[k] * geometric;
            (
                numerator / (psi_walk + psi_tail_bound),
                (numerator + numerator_tail) / psi_walk,
            )
        })
        .collect();
    let psi_matrix = DebtProfile::new(econ, &Leontief::new(econ)?, zeta)?.psi;
    Ok(WalkExpansion {
        max_length,
        psi_matrix,
        psi_walk,
        psi_tail_bound,
        discounted_leontief_walk: l_walk,
        entry_tail_bound,
        centrality_bounds,
        contraction,
    })
}
