// SPDX-License-Identifier: Apache-2.0
//! Conditional expectations `E[f(η) | φ(η)]` under the supported backends.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::economy::{Economy, Leontief};
use crate::error::{Error, Result};
use crate::expsum::ExpSum;
use crate::quad;
use crate::shocks::{BoxCell, NormalizedShocks, Observation, ShockModel, SignalModel};

/// Draws per independently seeded substream.
pub const CHUNK_SIZE: usize = 1 << 14;
/// Rejection sampling fails below this acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-6;
pub const DEFAULT_NUM_DRAWS: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 42;

const QUAD_ABS_TOL: f64 = 1e-14;
const QUAD_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum Backend {
    ExactDiscrete,
    AnalyticExponential,
    MonteCarlo { num_draws: usize, seed: u64 },
}

/// Value with a Monte Carlo standard error (zero for exact backends).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_err: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationEngine {
    pub backend: Backend,
}

impl ExpectationEngine {
    pub fn new(backend: Backend) -> Self {
        Self { backend }
    }

    pub fn exact() -> Self {
        Self::new(Backend::ExactDiscrete)
    }

    pub fn analytic() -> Self {
        Self::new(Backend::AnalyticExponential)
    }

    pub fn monte_carlo(num_draws: usize, seed: u64) -> Self {
        Self::new(Backend::MonteCarlo { num_draws, seed })
    }

    /// Law of `η` given that the signal took the value `obs`.
    pub fn condition(
        &self,
        model: &ShockModel,
        signal: &SignalModel,
        obs: &Observation,
    ) -> Result<ConditionalLaw> {
        let n = model.n();
        let (cell, cell_index) = match (signal, obs) {
            (SignalModel::Full, Observation::Exact(eta)) => {
                if eta.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "observed shock has dimension {}, expected {n}",
                        eta.len()
                    )));
                }
                return Ok(ConditionalLaw::Atom(eta.clone()));
            }
            (SignalModel::None, Observation::Constant) => (BoxCell::unbounded(n), 0),
            (SignalModel::Partition { cells }, Observation::Cell(i)) => {
                (cells.get(*i).cloned().ok_or(Error::EmptyCell(*i))?, *i)
            }
            _ => {
                return Err(Error::InvalidSignal(
                    "observation does not match the signal kind".into(),
                ))
            }
        };

        if let ShockModel::Degenerate { eta } = model {
            return if cell.contains(eta) {
                Ok(ConditionalLaw::Atom(eta.clone()))
            } else {
                Err(Error::EmptyCell(cell_index))
            };
        }

        match self.backend {
            Backend::ExactDiscrete => match model {
                ShockModel::Discrete { support } => {
                    exact_discrete(support, &cell, cell_index, n)
                }
                _ => Err(Error::UnsupportedAnalytic(
                    "the exact backend needs a discrete shock law".into(),
                )),
            },
            Backend::AnalyticExponential => match model {
                ShockModel::SingleNodeExponential { n, sector, rate } => {
                    if (0..*n).any(|k| k != *sector && !cell.bounds[k].contains(0.0)) {
                        return Err(Error::EmptyCell(cell_index));
                    }
                    let b = cell.bounds[*sector];
                    let law = ExponentialCell {
                        n: *n,
                        sector: *sector,
                        rate: *rate,
                        lo: b.lo(),
                        hi: b.hi().min(0.0),
                    };
                    if law.mass() <= 0.0 {
                        return Err(Error::EmptyCell(cell_index));
                    }
                    Ok(ConditionalLaw::Exponential(law))
                }
                ShockModel::Discrete { support } => {
                    exact_discrete(support, &cell, cell_index, n)
                }
                _ => Err(Error::UnsupportedAnalytic(
                    "closed forms exist only for a single exponential shock".into(),
                )),
            },
            Backend::MonteCarlo { num_draws, seed } => {
                monte_carlo(model, &cell, cell_index, num_draws, seed)
            }
        }
    }

    /// `E[f(η) | φ = obs]`.
    pub fn conditional_expectation(
        &self,
        model: &ShockModel,
        signal: &SignalModel,
        obs: &Observation,
        f: impl Fn(&[f64]) -> f64 + Sync,
    ) -> Result<Estimate> {
        Ok(self.condition(model, signal, obs)?.expect(f))
    }

    /// `τ` and `ε` at the realization `eta`, conditioning on `φ(eta)`.
    pub fn normalized_shocks(
        &self,
        econ: &Economy,
        leontief: &Leontief,
        model: &ShockModel,
        signal: &SignalModel,
        eta: &[f64],
    ) -> Result<NormalizedShocks> {
        let law = self.condition(model, signal, &signal.observe(eta))?;
        let expected = law.expected_exp_rho(leontief);
        NormalizedShocks::new(econ, leontief, &expected, eta)
    }
}

fn exact_discrete(
    support: &[crate::shocks::SupportPoint],
    cell: &BoxCell,
    cell_index: usize,
    n: usize,
) -> Result<ConditionalLaw> {
    let inside: Vec<_> = support.iter().filter(|p| p.prob > 0.0 && cell.contains(&p.eta)).collect();
    let mass: f64 = inside.iter().map(|p| p.prob).sum();
    if mass <= 0.0 {
        return Err(Error::EmptyCell(cell_index));
    }
    Ok(ConditionalLaw::Sample(WeightedSample {
        n,
        points: inside.iter().flat_map(|p| p.eta.iter().copied()).collect(),
        weights: inside.iter().map(|p| p.prob / mass).collect(),
        monte_carlo: false,
    }))
}

/// Fills `out` with draws `[start, start + count)` of the seeded stream.
/// Chunk `c` always uses substream `c`, so any split of the index range
/// reproduces the same draws.
pub fn draw_chunk(
    sampler: &crate::shocks::Sampler<'_>,
    n: usize,
    seed: u64,
    chunk: usize,
    count: usize,
    out: &mut Vec<f64>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    out.clear();
    out.resize(n * count, 0.0);
    for row in out.chunks_exact_mut(n) {
        sampler.draw(&mut rng, row);
    }
}

/// Chunk boundaries for `num_draws` draws.
pub fn chunk_ranges(num_draws: usize) -> Vec<(usize, usize)> {
    (0..num_draws.div_ceil(CHUNK_SIZE))
        .map(|c| (c, CHUNK_SIZE.min(num_draws - c * CHUNK_SIZE)))
        .collect()
}

fn monte_carlo(
    model: &ShockModel,
    cell: &BoxCell,
    cell_index: usize,
    num_draws: usize,
    seed: u64,
) -> Result<ConditionalLaw> {
    if num_draws == 0 {
        return Err(Error::InvalidArgument("num_draws must be positive".into()));
    }
    let n = model.n();
    let sampler = model.sampler()?;
    let accepted: Vec<Vec<f64>> = chunk_ranges(num_draws)
        .into_par_iter()
        .map(|(chunk, count)| {
            let mut buf = Vec::new();
            draw_chunk(&sampler, n, seed, chunk, count, &mut buf);
            buf.chunks_exact(n).filter(|eta| cell.contains(eta)).flatten().copied().collect()
        })
        .collect();
    let points: Vec<f64> = accepted.concat();
    let kept = points.len() / n;
    let rate = kept as f64 / num_draws as f64;
    if kept == 0 {
        return Err(Error::EmptyCell(cell_index));
    }
    if rate < MIN_ACCEPTANCE {
        return Err(Error::LowAcceptance { rate, floor: MIN_ACCEPTANCE });
    }
    Ok(ConditionalLaw::Sample(WeightedSample {
        n,
        weights: vec![1.0 / kept as f64; kept],
        points,
        monte_carlo: true,
    }))
}

/// Finitely many weighted shock vectors: an exact discrete law restricted to
/// a cell, or equally weighted Monte Carlo draws.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    n: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    monte_carlo: bool,
}

impl WeightedSample {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn is_monte_carlo(&self) -> bool {
        self.monte_carlo
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points.chunks_exact(self.n).zip(self.weights.iter().copied())
    }

    /// Weighted mean of `values[i]`, with the i.i.d. standard error when
    /// the sample is Monte Carlo.
    pub fn mean_of(&self, values: &[f64]) -> Estimate {
        let mean = weighted_sum(values, &self.weights);
        if !self.monte_carlo || values.len() < 2 {
            return Estimate::exact(mean);
        }
        let m = values.len() as f64;
        let ss = chunked_sum(values.len(), |i| (values[i] - mean).powi(2));
        Estimate { value: mean, std_err: (ss / (m - 1.0) / m).sqrt() }
    }
}

/// `Σ values[i] weights[i]` with a summation order fixed by chunk index.
pub fn weighted_sum(values: &[f64], weights: &[f64]) -> f64 {
    chunked_sum(values.len(), |i| values[i] * weights[i])
}

/// Deterministic parallel sum of `term(i)` over `0..len`.
pub fn chunked_sum(len: usize, term: impl Fn(usize) -> f64 + Sync) -> f64 {
    if len <= CHUNK_SIZE {
        return (0..len).map(term).sum();
    }
    let partials: Vec<f64> = (0..len.div_ceil(CHUNK_SIZE))
        .into_par_iter()
        .map(|c| (c * CHUNK_SIZE..len.min((c + 1) * CHUNK_SIZE)).map(&term).sum())
        .collect();
    partials.iter().sum()
}

/// `η_sector = -Exp(rate)` conditioned on `(lo, hi]`, other coordinates zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialCell {
    pub n: usize,
    pub sector: usize,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ExponentialCell {
    pub fn mass(&self) -> f64 {
        ExpSum::constant(1.0).integrate_exponential(self.rate, self.lo, self.hi)
    }

    /// Exact conditional mean of an exponential sum in the shocked coordinate.
    pub fn mean(&self, h: &ExpSum) -> f64 {
        h.integrate_exponential(self.rate, self.lo, self.hi) / self.mass()
    }

    /// Numerical conditional mean of a generic function of the shocked
    /// coordinate, integrating over `u = e^{rate·x}` which is uniform.
    pub fn mean_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        let u_lo = if self.lo == f64::NEG_INFINITY { 0.0 } else { (self.rate * self.lo).exp() };
        let u_hi = (self.rate * self.hi).exp();
        let g = |u: f64| f(u.ln() / self.rate);
        quad::integrate(g, u_lo, u_hi, QUAD_ABS_TOL, QUAD_REL_TOL) / (u_hi - u_lo)
    }

    /// Mean over the sub-range `(a, b]` of the cell, weighted by the
    /// conditional law: `E[h·1{a < x ≤ b}]`.
    pub fn partial_mean(&self, h: &ExpSum, a: f64, b: f64) -> f64 {
        h.integrate_exponential(self.rate, a.max(self.lo), b.min(self.hi)) / self.mass()
    }
}

/// Conditional law of `η` given one realized signal value.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionalLaw {
    Atom(Vec<f64>),
    Sample(WeightedSample),
    Exponential(ExponentialCell),
}

impl ConditionalLaw {
    pub fn n(&self) -> usize {
        match self {
            Self::Atom(eta) => eta.len(),
            Self::Sample(s) => s.n,
            Self::Exponential(c) => c.n,
        }
    }

    pub fn expect(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> Estimate {
        match self {
            Self::Atom(eta) => Estimate::exact(f(eta)),
            Self::Sample(s) => {
                let values: Vec<f64> = if s.len() > CHUNK_SIZE {
                    s.points.par_chunks_exact(s.n).map(&f).collect()
                } else {
                    s.points.chunks_exact(s.n).map(&f).collect()
                };
                s.mean_of(&values)
            }
            Self::Exponential(c) => {
                Estimate::exact(c.mean_of(|x| {
                    let mut eta = vec![0.0; c.n];
                    eta[c.sector] = x;
                    f(&eta)
                }))
            }
        }
    }

    /// `E[e^{Σ coef_j η_j}]`, in closed form under the exponential law.
    pub fn expect_exp_linear(&self, coef: &[f64]) -> Estimate {
        match self {
            Self::Exponential(c) => Estimate::exact(c.mean(&ExpSum::new([(1.0, coef[c.sector])]))),
            _ => self.expect(|eta| eta.iter().zip(coef).map(|(e, a)| e * a).sum::<f64>().exp()),
        }
    }

    /// `E[e^{ρ_k} | φ]` for every sector.
    pub fn expected_exp_rho(&self, leontief: &Leontief) -> Vec<f64> {
        self.expected_exp_rho_with_err(leontief).into_iter().map(|e| e.value).collect()
    }

    pub fn expected_exp_rho_with_err(&self, leontief: &Leontief) -> Vec<Estimate> {
        let rows = leontief.rows();
        match self {
            Self::Sample(s) => {
                // One pass over the sample for all sectors.
                let n = s.n;
                let rho_exp: Vec<Vec<f64>> = (0..n)
                    .map(|k| s.iter().map(|(eta, _)| dot(&rows[k], eta).exp()).collect())
                    .collect();
                rho_exp.iter().map(|v| s.mean_of(v)).collect()
            }
            _ => rows.iter().map(|row| self.expect_exp_linear(row)).collect(),
        }
    }

    /// The joint law of `(τ_k, ε_k)` used by the cost-of-debt equation.
    pub fn sector_law(
        &self,
        econ: &Economy,
        leontief: &Leontief,
        expected_exp_rho: &[f64],
        k: usize,
    ) -> Result<SectorLaw> {
        econ.check_sector(k)?;
        let n = econ.n();
        match self {
            Self::Exponential(cell) => {
                let o = cell.sector;
                let tau_of = |j: usize| ExpSum::new([(1.0 / expected_exp_rho[j], leontief.get(j, o))]);
                let mut eps = ExpSum::constant(econ.labor_shares()[k]);
                for j in 0..n {
                    let a = econ.input_share(j, k);
                    if a > 0.0 {
                        eps = eps.add_scaled(&tau_of(j), a);
                    }
                }
                Ok(SectorLaw::Exponential { tau: tau_of(k), eps, cell: *cell })
            }
            Self::Atom(eta) => {
                let s = NormalizedShocks::new(econ, leontief, expected_exp_rho, eta)?;
                Ok(SectorLaw::Points {
                    tau: vec![s.tau[k]],
                    eps: vec![s.epsilon[k]],
                    weights: vec![1.0],
                })
            }
            Self::Sample(sample) => {
                let beta = econ.labor_shares();
                let rows = leontief.rows();
                let suppliers: Vec<(usize, f64)> = (0..n)
                    .filter(|&j| econ.input_share(j, k) > 0.0)
                    .map(|j| (j, econ.input_share(j, k)))
                    .collect();
                let mut tau = Vec::with_capacity(sample.len());
                let mut eps = Vec::with_capacity(sample.len());
                for (eta, _) in sample.iter() {
                    let t = |j: usize| dot(&rows[j], eta).exp() / expected_exp_rho[j];
                    tau.push(t(k));
                    eps.push(beta[k] + suppliers.iter().map(|(j, a)| a * t(*j)).sum::<f64>());
                }
                Ok(SectorLaw::Points { tau, eps, weights: sample.weights.clone() })
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Joint law of one sector's `(τ, ε)` pair.
#[derive(Debug, Clone, PartialEq)]
pub enum SectorLaw {
    Points { tau: Vec<f64>, eps: Vec<f64>, weights: Vec<f64> },
    Exponential { tau: ExpSum, eps: ExpSum, cell: ExponentialCell },
}

impl SectorLaw {
    /// `E[min(ε, τ)]`.
    pub fn min_mean(&self) -> f64 {
        match self {
            Self::Points { tau, eps, weights } => {
                chunked_sum(tau.len(), |i| weights[i] * tau[i].min(eps[i]))
            }
            Self::Exponential { tau, eps, cell } => {
                let gap = tau.add_scaled(eps, -1.0);
                piecewise(cell, &gap.roots(cell.lo, cell.hi), |x| {
                    if tau.eval(x) >= eps.eval(x) {
                        eps.clone()
                    } else {
                        tau.clone()
                    }
                })
            }
        }
    }

    /// `E[clamp(xτ, (1-θ)ε, xε)]` with `clamp(a, b, c) = min(max(a, b), c)`.
    pub fn clamp_mean(&self, x: f64, theta: f64) -> f64 {
        let floor = 1.0 - theta;
        match self {
            Self::Points { tau, eps, weights } => chunked_sum(tau.len(), |i| {
                weights[i] * (x * tau[i]).max(floor * eps[i]).min(x * eps[i])
            }),
            Self::Exponential { tau, eps, cell } => {
                let gap = tau.add_scaled(eps, -1.0);
                let low_gap = tau.scaled(x).add_scaled(eps, -floor);
                let mut knots = gap.roots(cell.lo, cell.hi);
                knots.extend(low_gap.roots(cell.lo, cell.hi));
                knots.sort_by(f64::total_cmp);
                piecewise(cell, &knots, |p| {
                    let (t, e) = (tau.eval(p), eps.eval(p));
                    if t >= e {
                        eps.scaled(x)
                    } else if x * t >= floor * e {
                        tau.scaled(x)
                    } else {
                        eps.scaled(floor)
                    }
                })
            }
        }
    }

    /// Mean of `τ` and of `ε`.
    pub fn means(&self) -> (f64, f64) {
        match self {
            Self::Points { tau, eps, weights } => (weighted_sum(tau, weights), weighted_sum(eps, weights)),
            Self::Exponential { tau, eps, cell } => (cell.mean(tau), cell.mean(eps)),
        }
    }
}

/// Integrates the piece chosen at an interior point of every sub-interval
/// delimited by `knots` over the cell.
fn piecewise(cell: &ExponentialCell, knots: &[f64], piece: impl Fn(f64) -> ExpSum) -> f64 {
    let mut edges = vec![cell.lo];
    edges.extend(knots.iter().copied().filter(|k| *k > cell.lo && *k < cell.hi));
    edges.push(cell.hi);
    edges
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let probe = if w[0] == f64::NEG_INFINITY { w[1] - 1.0 } else { 0.5 * (w[0] + w[1]) };
            cell.partial_mean(&piece(probe), w[0], w[1])
        })
        .sum()
}
