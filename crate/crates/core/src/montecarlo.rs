// SPDX-License-Identifier: Apache-2.0
//! Seeded simulation campaigns over shock draws.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::debt::DebtProfile;
use crate::economy::{Economy, Leontief};
use crate::engine::{chunk_ranges, draw_chunk, Estimate, CHUNK_SIZE, DEFAULT_NUM_DRAWS, DEFAULT_SEED};
use crate::equilibrium::{welfare_bound_check, Equilibrium, Realization};
use crate::error::{Error, Result};
use crate::shocks::{NormalizedShocks, Observation, ShockModel, SignalModel};

pub const BATCHES: usize = 32;
pub const DEFAULT_BINS: usize = 64;
/// Welfare slack below this counts as a violated welfare bound.
pub const WELFARE_SLACK_TOL: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CampaignConfig {
    pub num_draws: usize,
    pub seed: u64,
    pub bins: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self { num_draws: DEFAULT_NUM_DRAWS, seed: DEFAULT_SEED, bins: DEFAULT_BINS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn new(lo: f64, hi: f64, bins: usize) -> Self {
        let edges = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        Self { edges, counts: vec![0; bins] }
    }

    fn bin(&self, x: f64) -> usize {
        let bins = self.counts.len();
        let (lo, hi) = (self.edges[0], self.edges[bins]);
        if hi <= lo {
            return 0;
        }
        (((x - lo) / (hi - lo) * bins as f64).floor().max(0.0) as usize).min(bins - 1)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorHistograms {
    pub tau: Histogram,
    pub epsilon: Histogram,
    pub profit: Histogram,
}

/// Frequency of one exact set of defaulting sectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cascade {
    pub sectors: Vec<usize>,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub num_draws: usize,
    pub seed: u64,
    /// Draws that fell in the conditioning cell.
    pub accepted_draws: usize,
    pub theta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub xi: Vec<f64>,
    pub y0: Vec<f64>,
    pub c0: Vec<f64>,
    pub profit_mean: Vec<Estimate>,
    pub profit_sd: Vec<Estimate>,
    pub default_prob: Vec<Estimate>,
    pub tau_mean: Vec<Estimate>,
    pub epsilon_mean: Vec<Estimate>,
    pub cascades: Vec<Cascade>,
    pub welfare_mean: Estimate,
    pub welfare_bound_violations: u64,
    pub min_welfare_slack: f64,
    pub histograms: Vec<SectorHistograms>,
}

impl SimulationReport {
    pub fn n(&self) -> usize {
        self.zeta.len()
    }

    /// Frequency with which exactly `sectors` default.
    pub fn cascade_frequency(&self, sectors: &[usize]) -> f64 {
        self.cascades.iter().find(|c| c.sectors == sectors).map_or(0.0, |c| c.frequency)
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    count: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, o: &Self) {
        self.count += o.count;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn mean(&self) -> f64 {
        self.sum / self.count
    }

    fn sd(&self) -> f64 {
        let m = self.mean();
        ((self.sum_sq / self.count - m * m).max(0.0) * self.count / (self.count - 1.0)).sqrt()
    }

    fn mean_estimate(&self) -> Estimate {
        Estimate { value: self.mean(), std_err: self.sd() / self.count.sqrt() }
    }
}

#[derive(Debug, Clone)]
struct Partial {
    accepted: usize,
    profit: Vec<Moments>,
    profit_batches: Vec<Vec<Moments>>,
    tau: Vec<Moments>,
    epsilon: Vec<Moments>,
    defaults: Vec<u64>,
    cascades: BTreeMap<Vec<usize>, u64>,
    welfare: Moments,
    violations: u64,
    min_slack: f64,
    /// Per sector: (min, max) of τ, ε, π.
    ranges: Vec<[(f64, f64); 3]>,
}

impl Partial {
    fn new(n: usize) -> Self {
        Self {
            accepted: 0,
            profit: vec![Moments::default(); n],
            profit_batches: vec![vec![Moments::default(); n]; BATCHES],
            tau: vec![Moments::default(); n],
            epsilon: vec![Moments::default(); n],
            defaults: vec![0; n],
            cascades: BTreeMap::new(),
            welfare: Moments::default(),
            violations: 0,
            min_slack: f64::INFINITY,
            ranges: vec![[(f64::INFINITY, f64::NEG_INFINITY); 3]; n],
        }
    }

    fn merge(&mut self, o: &Self) {
        self.accepted += o.accepted;
        for k in 0..self.profit.len() {
            self.profit[k].merge(&o.profit[k]);
            self.tau[k].merge(&o.tau[k]);
            self.epsilon[k].merge(&o.epsilon[k]);
            self.defaults[k] += o.defaults[k];
            for s in 0..3 {
                let (a, b) = o.ranges[k][s];
                let r = &mut self.ranges[k][s];
                *r = (r.0.min(a), r.1.max(b));
            }
        }
        for (mine, theirs) in self.profit_batches.iter_mut().zip(&o.profit_batches) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                m.merge(t);
            }
        }
        for (key, count) in &o.cascades {
            *self.cascades.entry(key.clone()).or_default() += count;
        }
        self.welfare.merge(&o.welfare);
        self.violations += o.violations;
        self.min_slack = self.min_slack.min(o.min_slack);
    }
}

/// Everything a campaign needs to turn a draw into a realization.
struct Context<'a> {
    econ: &'a Economy,
    leontief: &'a Leontief,
    profile: &'a DebtProfile,
    equil: &'a Equilibrium,
    signal: &'a SignalModel,
    observation: &'a Observation,
}

impl Context<'_> {
    fn realize(&self, eta: &[f64]) -> Result<Option<Realization>> {
        let obs = self.signal.observe(eta);
        let shocks = match (&obs, self.observation) {
            (Observation::Exact(_), _) => {
                // Full information: prices condition on the draw itself.
                let rho = self.leontief.apply(eta);
                let expected: Vec<f64> = rho.iter().map(|r| r.exp()).collect();
                NormalizedShocks::new(self.econ, self.leontief, &expected, eta)?
            }
            (o, target) if o == target => NormalizedShocks::new(
                self.econ,
                self.leontief,
                &self.equil.expected_exp_rho,
                eta,
            )?,
            _ => return Ok(None),
        };
        Ok(Some(Realization::from_shocks(
            self.econ,
            self.leontief,
            self.profile,
            self.equil,
            eta,
            shocks,
        )))
    }
}

/// Simulates `config.num_draws` shocks, keeps those consistent with the
/// observed signal and aggregates profits, defaults, cascades and welfare.
#[allow(clippy::too_many_arguments)]
pub fn run_campaign(
    econ: &Economy,
    leontief: &Leontief,
    profile: &DebtProfile,
    equil: &Equilibrium,
    model: &ShockModel,
    signal: &SignalModel,
    observation: &Observation,
    config: CampaignConfig,
) -> Result<SimulationReport> {
    let n = econ.n();
    if model.n() != n || profile.n() != n || equil.n() != n {
        return Err(Error::DimensionMismatch("campaign inputs disagree on sector count".into()));
    }
    if config.num_draws < 2 || config.bins == 0 {
        return Err(Error::InvalidArgument("need at least 2 draws and 1 bin".into()));
    }
    model.validate()?;
    signal.validate(model)?;
    let sampler = model.sampler()?;
    let ctx = Context { econ, leontief, profile, equil, signal, observation };
    let chunks = chunk_ranges(config.num_draws);
    let batch_of = |i: usize| i * BATCHES / config.num_draws;

    let partials: Vec<Partial> = chunks
        .par_iter()
        .map(|&(chunk, count)| -> Result<Partial> {
            let mut buf = Vec::new();
            draw_chunk(&sampler, n, config.seed, chunk, count, &mut buf);
            let mut p = Partial::new(n);
            for (i, eta) in buf.chunks_exact(n).enumerate() {
                let Some(r) = ctx.realize(eta)? else { continue };
                let batch = batch_of(chunk * CHUNK_SIZE + i);
                p.accepted += 1;
                let mut set = Vec::new();
                for k in 0..n {
                    p.profit[k].push(r.profit[k]);
                    p.profit_batches[batch][k].push(r.profit[k]);
                    p.tau[k].push(r.tau[k]);
                    p.epsilon[k].push(r.epsilon[k]);
                    if r.defaults(k) {
                        p.defaults[k] += 1;
                        set.push(k);
                    }
                    for (s, x) in [r.tau[k], r.epsilon[k], r.profit[k]].into_iter().enumerate() {
                        let range = &mut p.ranges[k][s];
                        *range = (range.0.min(x), range.1.max(x));
                    }
                }
                *p.cascades.entry(set).or_default() += 1;
                p.welfare.push(r.welfare);
                let slack = welfare_bound_check(&r, leontief.centrality()).slack;
                p.min_slack = p.min_slack.min(slack);
                if slack < WELFARE_SLACK_TOL {
                    p.violations += 1;
                }
            }
            Ok(p)
        })
        .collect::<Result<_>>()?;

    let mut total = Partial::new(n);
    for p in &partials {
        total.merge(p);
    }
    let accepted = total.accepted;
    if accepted < 2 {
        return Err(Error::EmptyCell(match observation {
            Observation::Cell(i) => *i,
            _ => 0,
        }));
    }
    let m = accepted as f64;

    let histograms = histograms(&ctx, &sampler, &chunks, config, &total)?;
    let profit_sd = (0..n)
        .map(|k| {
            let batch_sds: Vec<f64> = total
                .profit_batches
                .iter()
                .filter(|b| b[k].count >= 2.0)
                .map(|b| b[k].sd())
                .collect();
            let b = batch_sds.len() as f64;
            let se = if b >= 2.0 {
                let mean = batch_sds.iter().sum::<f64>() / b;
                (batch_sds.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (b - 1.0) / b).sqrt()
            } else {
                f64::NAN
            };
            Estimate { value: total.profit[k].sd(), std_err: se }
        })
        .collect();
    let default_prob = total
        .defaults
        .iter()
        .map(|d| {
            let p = *d as f64 / m;
            Estimate { value: p, std_err: (p * (1.0 - p) / m).sqrt() }
        })
        .collect();
    let cascades = total
        .cascades
        .iter()
        .map(|(sectors, c)| Cascade { sectors: sectors.clone(), frequency: *c as f64 / m })
        .collect();

    Ok(SimulationReport {
        num_draws: config.num_draws,
        seed: config.seed,
        accepted_draws: accepted,
        theta: econ.leverage().to_vec(),
        zeta: profile.zeta.clone(),
        xi: profile.xi.clone(),
        y0: equil.y0.clone(),
        c0: equil.c0.clone(),
        profit_mean: total.profit.iter().map(Moments::mean_estimate).collect(),
        profit_sd,
        default_prob,
        tau_mean: total.tau.iter().map(Moments::mean_estimate).collect(),
        epsilon_mean: total.epsilon.iter().map(Moments::mean_estimate).collect(),
        cascades,
        welfare_mean: total.welfare.mean_estimate(),
        welfare_bound_violations: total.violations,
        min_welfare_slack: total.min_slack,
        histograms,
    })
}

/// Second pass over the same draws, binned over the observed ranges.
fn histograms(
    ctx: &Context<'_>,
    sampler: &crate::shocks::Sampler<'_>,
    chunks: &[(usize, usize)],
    config: CampaignConfig,
    total: &Partial,
) -> Result<Vec<SectorHistograms>> {
    let n = ctx.econ.n();
    let empty: Vec<[Histogram; 3]> = total
        .ranges
        .iter()
        .map(|r| r.map(|(lo, hi)| Histogram::new(lo, hi, config.bins)))
        .collect();
    let partials: Vec<Vec<[Histogram; 3]>> = chunks
        .par_iter()
        .map(|&(chunk, count)| -> Result<Vec<[Histogram; 3]>> {
            let mut buf = Vec::new();
            draw_chunk(sampler, n, config.seed, chunk, count, &mut buf);
            let mut h = empty.clone();
            for eta in buf.chunks_exact(n) {
                let Some(r) = ctx.realize(eta)? else { continue };
                for k in 0..n {
                    for (s, x) in [r.tau[k], r.epsilon[k], r.profit[k]].into_iter().enumerate() {
                        let b = h[k][s].bin(x);
                        h[k][s].counts[b] += 1;
                    }
                }
            }
            Ok(h)
        })
        .collect::<Result<_>>()?;
    let mut out = empty;
    for p in &partials {
        for (acc, part) in out.iter_mut().zip(p) {
            for s in 0..3 {
                for (a, b) in acc[s].counts.iter_mut().zip(&part[s].counts) {
                    *a += b;
                }
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|[tau, epsilon, profit]| SectorHistograms { tau, epsilon, profit })
        .collect())
}

/// Per-sector differences `other - base`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub zeta: f64,
    pub xi: f64,
    pub y: f64,
    pub c: f64,
    pub default_prob: Estimate,
}

pub fn compare_leverage(base: &SimulationReport, other: &SimulationReport) -> Result<Vec<DeltaRow>> {
    if base.n() != other.n() {
        return Err(Error::DimensionMismatch(format!(
            "reports have {} and {} sectors",
            base.n(),
            other.n()
        )));
    }
    Ok((0..base.n())
        .map(|k| {
            let (a, b) = (base.default_prob[k], other.default_prob[k]);
            DeltaRow {
                zeta: other.zeta[k] - base.zeta[k],
                xi: other.xi[k] - base.xi[k],
                y: other.y0[k] - base.y0[k],
                c: other.c0[k] - base.c0[k],
                default_prob: Estimate {
                    value: b.value - a.value,
                    std_err: a.std_err.hypot(b.std_err),
                },
            }
        })
        .collect())
}
