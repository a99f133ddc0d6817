// SPDX-License-Identifier: Apache-2.0
//! Default prediction when a single sector is shocked.
//!
//! Write `g(t) = e^{tη_o} / E[e^{tη_o} | φ]`. Then `τ_k = g(L_{ko})` and
//! `ε_k = β_k g(0) + Σ_j A_{jk} g(L_{jo})`, so the sign of `τ_k - ε_k`
//! follows from the curvature of `g`, which is governed by the mean and
//! spread of the exponentially tilted shock law.

use serde::Serialize;

use crate::economy::{Economy, Leontief};
use crate::engine::ConditionalLaw;
use crate::error::{Error, Result};

const SCAN_POINTS: usize = 256;
const REFINE_TOL: f64 = 1e-9;
const ROOT_ITERS: usize = 400;
/// Relative band inside which the cycle condition counts as a tie.
const TIE_TOL: f64 = 1e-12;

/// Mean, second moment and standard deviation of `η_o` under the law
/// tilted by `e^{tη_o}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub m1: f64,
    pub m2: f64,
    pub sigma: f64,
}

impl Moments {
    fn new(m1: f64, m2: f64) -> Self {
        Self { m1, m2, sigma: (m2 - m1 * m1).max(0.0).sqrt() }
    }
}

/// Tilted moments of the shocked coordinate under a conditional law.
#[derive(Debug, Clone, Copy)]
pub struct TiltedMoments<'a> {
    law: &'a ConditionalLaw,
    sector: usize,
}

impl<'a> TiltedMoments<'a> {
    pub fn new(law: &'a ConditionalLaw, sector: usize) -> Self {
        Self { law, sector }
    }

    pub fn at(&self, t: f64) -> Moments {
        match self.law {
            ConditionalLaw::Exponential(cell) => {
                // Truncated exponential with rate μ on (lo, hi].
                let mu = cell.rate + t;
                let at = |x: f64| -> (f64, f64, f64) {
                    if x == f64::NEG_INFINITY {
                        return (0.0, 0.0, 0.0);
                    }
                    let e = (mu * (x - cell.hi)).exp();
                    (e / mu, e * (x / mu - 1.0 / (mu * mu)), e * (x * x / mu - 2.0 * x / (mu * mu) + 2.0 / mu.powi(3)))
                };
                let (u0, u1, u2) = at(cell.hi);
                let (l0, l1, l2) = at(cell.lo);
                let mass = u0 - l0;
                Moments::new((u1 - l1) / mass, (u2 - l2) / mass)
            }
            law => {
                let o = self.sector;
                // Subtract the largest exponent before exponentiating.
                let base = match law {
                    ConditionalLaw::Sample(s) => s.iter().map(|(eta, _)| eta[o]).fold(f64::NEG_INFINITY, f64::max),
                    ConditionalLaw::Atom(eta) => eta[o],
                    ConditionalLaw::Exponential(_) => unreachable!(),
                };
                let w = |eta: &[f64]| (t * (eta[o] - base)).exp();
                let z = law.expect(w).value;
                let m1 = law.expect(|eta| eta[o] * w(eta)).value / z;
                let m2 = law.expect(|eta| eta[o] * eta[o] * w(eta)).value / z;
                Moments::new(m1, m2)
            }
        }
    }

    /// `m1 - σ ≤ η ≤ m1 + σ`: `g` is concave at `t`.
    pub fn inside(&self, t: f64, eta: f64) -> bool {
        let m = self.at(t);
        eta >= m.m1 - m.sigma && eta <= m.m1 + m.sigma
    }

    /// `η` strictly outside `[m1 - σ, m1 + σ]`: `g` is strictly convex at `t`.
    pub fn outside(&self, t: f64, eta: f64) -> bool {
        let m = self.at(t);
        eta < m.m1 - m.sigma || eta > m.m1 + m.sigma
    }

    /// `m1 ≤ η ≤ m1 + σ`: `g` is concave and non-decreasing at `t`.
    pub fn inside_upper(&self, t: f64, eta: f64) -> bool {
        let m = self.at(t);
        eta >= m.m1 && eta <= m.m1 + m.sigma
    }

    /// `η < m1 - σ`: `g` is strictly convex and decreasing at `t`.
    pub fn below(&self, t: f64, eta: f64) -> bool {
        let m = self.at(t);
        eta < m.m1 - m.sigma
    }
}

fn grid(limit: f64) -> impl Iterator<Item = f64> {
    (0..=SCAN_POINTS).map(move |i| limit * i as f64 / SCAN_POINTS as f64)
}

/// Largest `T ≤ limit` such that `holds` on `[0, T]`, from the first grid
/// failure refined by bisection. `None` if it fails at zero.
fn last_holding(limit: f64, on_grid: &[bool], holds: impl Fn(f64) -> bool) -> Option<f64> {
    let first_fail = on_grid.iter().position(|h| !h)?;
    if first_fail == 0 {
        return None;
    }
    let step = limit / SCAN_POINTS as f64;
    let (mut lo, mut hi) = (step * (first_fail - 1) as f64, step * first_fail as f64);
    while hi - lo > REFINE_TOL {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// The sector is not downstream of the shock.
    Never,
    NoDefault,
    Default,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorVerdict {
    pub verdict: Verdict,
    /// `max{L_{jo} : A_{jk} > 0}`, zero without suppliers.
    pub l_minus: f64,
    /// `L_{ko}`.
    pub exposure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefaultClassification {
    pub shocked: usize,
    pub eta: f64,
    /// Largest `t̄` with `η` inside `[m1 - σ, m1 + σ]` on `[0, t̄]`, capped
    /// at `scan_limit`.
    pub t_bar: Option<f64>,
    pub scan_limit: f64,
    pub sectors: Vec<SectorVerdict>,
}

impl DefaultClassification {
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.sectors.iter().map(|s| s.verdict).collect()
    }
}

fn check_single_node(law: &ConditionalLaw, o: usize) -> Result<()> {
    let off = |eta: &[f64]| eta.iter().enumerate().any(|(k, v)| k != o && *v != 0.0);
    let ok = match law {
        ConditionalLaw::Exponential(c) => c.sector == o,
        ConditionalLaw::Atom(eta) => !off(eta),
        ConditionalLaw::Sample(s) => s.iter().all(|(eta, _)| !off(eta)),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::UnsupportedShock)
    }
}

/// Sufficient conditions for default and for its absence at every sector
/// when only sector `o` is shocked and realizes `eta_o`.
pub fn classify_defaults_single_shock(
    econ: &Economy,
    leontief: &Leontief,
    law: &ConditionalLaw,
    o: usize,
    eta_o: f64,
) -> Result<DefaultClassification> {
    econ.check_sector(o)?;
    if law.n() != econ.n() {
        return Err(Error::DimensionMismatch(format!(
            "shock law has dimension {}, economy has {} sectors",
            law.n(),
            econ.n()
        )));
    }
    check_single_node(law, o)?;
    let n = econ.n();
    let moments = TiltedMoments::new(law, o);

    let l_minus: Vec<f64> = (0..n)
        .map(|k| {
            (0..n)
                .filter(|&j| econ.input_share(j, k) > 0.0)
                .map(|j| leontief.get(j, o))
                .fold(0.0, f64::max)
        })
        .collect();
    let max_l_minus = l_minus.iter().copied().fold(0.0, f64::max);
    let max_exposure = (0..n).map(|k| leontief.get(k, o)).fold(0.0, f64::max);
    // Covers every point at which g is evaluated.
    let scan_limit = 1f64.max(2.0 * max_l_minus).max(max_exposure).max(max_l_minus + 1.0);

    let on_grid: Vec<Moments> = grid(scan_limit).map(|t| moments.at(t)).collect();
    let inside: Vec<bool> =
        on_grid.iter().map(|m| eta_o >= m.m1 - m.sigma && eta_o <= m.m1 + m.sigma).collect();
    let t_bar = if inside.iter().all(|h| *h) {
        Some(scan_limit)
    } else {
        last_holding(scan_limit, &inside, |t| moments.inside(t, eta_o))
    };
    let convex_everywhere =
        on_grid.iter().all(|m| eta_o < m.m1 - m.sigma || eta_o > m.m1 + m.sigma);
    let decreasing_convex = on_grid.iter().all(|m| eta_o < m.m1 - m.sigma);

    let sectors = (0..n)
        .map(|k| {
            let exposure = leontief.get(k, o);
            let verdict = if k != o {
                // ε_k averages g over {0} ∪ {L_jo}; a single point gives τ = ε.
                let mut points: Vec<f64> = (0..n)
                    .filter(|&j| econ.input_share(j, k) > 0.0)
                    .map(|j| leontief.get(j, o))
                    .collect();
                if econ.labor_shares()[k] > 0.0 {
                    points.push(0.0);
                }
                let spread = points.iter().any(|p| (p - points[0]).abs() > 0.0);
                if exposure == 0.0 {
                    Verdict::Never
                } else if t_bar.is_some_and(|tb| l_minus[k] <= tb) {
                    Verdict::NoDefault
                } else if convex_everywhere && spread {
                    Verdict::Default
                } else {
                    Verdict::Undetermined
                }
            } else if leontief.get(o, o) == 1.0 {
                let mean = law.expect_exp_linear(&unit(n, o)).value;
                if eta_o.exp() < mean {
                    Verdict::Default
                } else {
                    Verdict::NoDefault
                }
            } else if grid(l_minus[o] + 1.0).all(|t| moments.inside_upper(t, eta_o)) {
                Verdict::NoDefault
            } else if decreasing_convex {
                Verdict::Default
            } else {
                Verdict::Undetermined
            };
            SectorVerdict { verdict, l_minus: l_minus[k], exposure }
        })
        .collect();

    Ok(DefaultClassification { shocked: o, eta: eta_o, t_bar, scan_limit, sectors })
}

fn unit(n: usize, o: usize) -> Vec<f64> {
    (0..n).map(|k| f64::from(u8::from(k == o))).collect()
}

/// Ground truth: sector `k` defaults iff `τ_k < ε_k`.
pub fn exact_default_predicate(tau: &[f64], epsilon: &[f64], k: usize) -> bool {
    tau[k] < epsilon[k]
}

/// Default thresholds of the directed line hit at its second sector by an
/// exponential shock: sector `k` (zero-based) defaults iff `η < x[k]`.
/// The first sector never defaults and gets `None`.
pub fn line_thresholds(n: usize, alpha: f64, lambda: f64) -> Result<Vec<Option<f64>>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate {lambda} must be positive")));
    }
    (0..n)
        .map(|k| match k {
            0 => Ok(None),
            1 => Ok(Some((lambda / (1.0 + lambda)).ln())),
            _ => line_threshold(k, alpha, lambda).map(Some),
        })
        .collect()
}

/// `(a^m + λ)e^{x a^m} - (a^m + aλ)e^{x a^{m-1}}` with `m` the distance to
/// the shocked sector.
pub fn line_gap(distance: usize, alpha: f64, lambda: f64, x: f64) -> f64 {
    let own = alpha.powi(distance as i32);
    let up = alpha.powi(distance as i32 - 1);
    (own + lambda) * (x * own).exp() - (own + alpha * lambda) * (x * up).exp()
}

fn line_threshold(k: usize, alpha: f64, lambda: f64) -> Result<f64> {
    let target = lambda * (1.0 - alpha);
    let g = |x: f64| line_gap(k - 1, alpha, lambda, x) - target;
    // g vanishes at 0 and is positive just below it.
    let mut hi = -1e-3;
    while g(hi) <= 0.0 {
        hi *= 0.5;
        if hi > -1e-14 {
            return Err(Error::ConvergenceFailure("no positive gap below zero".into()));
        }
    }
    let mut lo = 2.0 * hi;
    while g(lo) >= 0.0 {
        lo *= 2.0;
        if lo < -1e12 {
            return Err(Error::ConvergenceFailure("gap never turns negative".into()));
        }
    }
    for _ in 0..ROOT_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// How the closed-form cycle condition indexes sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleIndexing {
    /// Discount `ℓ_d = α^d / (1 - α^m)` at distance `d` from the shocked
    /// sector on an `m`-cycle; matches the Leontief inverse.
    Distance,
    /// The printed indices: `ℓ_k = α^k / (1 - α^{m+1})`, with the shocked
    /// sector as `k = 1` paired with `ℓ_0` and `ℓ_m`.
    Literal,
}

/// Closed-form default condition for the sector at `distance` downstream of
/// the shocked sector on a directed cycle of `sectors` sectors.
pub fn cycle_default_condition(
    alpha: f64,
    lambda: f64,
    sectors: usize,
    distance: usize,
    eta_o: f64,
    indexing: CycleIndexing,
) -> bool {
    let m = sectors as i32;
    let (own, pred) = match indexing {
        CycleIndexing::Distance => {
            let ell = |d: i32| alpha.powi(d) / (1.0 - alpha.powi(m));
            let d = distance as i32;
            (ell(d), if d == 0 { ell(m - 1) } else { ell(d - 1) })
        }
        CycleIndexing::Literal => {
            let ell = |k: i32| alpha.powi(k) / (1.0 - alpha.powi(m + 1));
            let k = distance as i32 + 1;
            if k == 1 {
                (ell(0), ell(m))
            } else {
                (ell(k), ell(k - 1))
            }
        }
    };
    // λ times the printed expression, with the η-free part collected so that
    // the tie at η = 0 is not decided by rounding.
    let level = own - alpha * pred;
    let moved = (own + lambda) * (own * eta_o).exp_m1() - alpha * (pred + lambda) * (pred * eta_o).exp_m1();
    level + moved < -TIE_TOL * (own + lambda)
}
