// SPDX-License-Identifier: Apache-2.0
//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rigidnet_core::shocks::SupportPoint;
use rigidnet_core::{Economy, ShockModel};

pub const SUPPORT_POINTS: usize = 8;

/// Dense positive input-output matrix with column sums in [0.2, 0.8],
/// strictly positive consumption weights, leverage either zero or in
/// [0.2, 1].
pub fn random_economy(rng: &mut ChaCha8Rng, n: usize) -> Economy {
    let mut rows = vec![vec![0.0; n]; n];
    for k in 0..n {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let share = rng.random_range(0.2..0.8);
        for j in 0..n {
            rows[j][k] = raw[j] / total * share;
        }
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut gamma: Vec<f64> = raw.iter().map(|g| g / total).collect();
    // Force an exact unit sum.
    let head: f64 = gamma[..n - 1].iter().sum();
    gamma[n - 1] = 1.0 - head;
    let theta = (0..n)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.2..=1.0) })
        .collect();
    Economy::from_rows(&rows, gamma, theta).expect("generator builds valid economies")
}

fn random_probs(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = p[..m - 1].iter().sum();
    p[m - 1] = 1.0 - head;
    p
}

/// Eight support points, every coordinate shocked, one point at zero.
pub fn random_support(rng: &mut ChaCha8Rng, n: usize) -> ShockModel {
    let probs = random_probs(rng, SUPPORT_POINTS);
    let support = probs
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let eta = if i == 0 {
                vec![0.0; n]
            } else {
                (0..n).map(|_| -rng.random_range(0.0..2.0)).collect()
            };
            SupportPoint::new(eta, p)
        })
        .collect();
    ShockModel::Discrete { support }
}

/// Eight support points shocking only `sector`.
pub fn random_single_node_support(rng: &mut ChaCha8Rng, n: usize, sector: usize) -> ShockModel {
    let probs = random_probs(rng, SUPPORT_POINTS);
    let support = probs
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut eta = vec![0.0; n];
            if i > 0 {
                eta[sector] = -rng.random_range(0.0..3.0);
            }
            SupportPoint::new(eta, p)
        })
        .collect();
    ShockModel::Discrete { support }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Composite Simpson rule on `[a, b]` with `panels` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        let x = a + h * i as f64;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// `E[g(η)]` for `η = -Exp(rate)` by Simpson on `[-45/rate, 0]`; the
/// neglected tail has mass `e^{-45}`.
pub fn exponential_expectation(g: impl Fn(f64) -> f64, rate: f64) -> f64 {
    simpson(|x| g(x) * rate * (rate * x).exp(), -45.0 / rate, 0.0, 400_000)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        a[r][j] -= f * a[c][j];
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// `L = (I - Aᵀ)⁻¹` by Gauss-Jordan.
pub fn leontief_oracle(econ: &Economy) -> Vec<Vec<f64>> {
    let n = econ.n();
    let m: Vec<Vec<f64>> = (0..n)
        .map(|k| (0..n).map(|j| f64::from(u8::from(j == k)) - econ.input_share(j, k)).collect())
        .collect();
    invert(&m)
}

/// `[a]_lo^hi`.
pub fn clamp(a: f64, lo: f64, hi: f64) -> f64 {
    a.max(lo).min(hi)
}

/// Bank profit on one loan from the lending terms alone: the bank lends
/// `θ·liabilities`, is owed `(θ + e^ζ - 1)·liabilities` and recovers what
/// the assets cover beyond the unlevered share of the liabilities.
pub fn bank_profit_oracle(assets: f64, liabilities: f64, theta: f64, zeta: f64) -> f64 {
    let lent = theta * liabilities;
    let owed = (theta + zeta.exp() - 1.0) * liabilities;
    let recoverable = (assets - (1.0 - theta) * liabilities).max(0.0);
    owed.min(recoverable) - lent
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
