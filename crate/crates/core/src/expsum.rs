// SPDX-License-Identifier: Apache-2.0
//! Finite sums `Σ cᵢ e^{aᵢ x}` on the half line `x ≤ 0`.
//!
//! Under a single exponential shock every normalized shock is such a sum of
//! the shocked coordinate, so clamp expectations reduce to exact piecewise
//! integrals once the crossing points are located.

const MERGE_TOL: f64 = 1e-14;
const BISECT_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpSum {
    /// `(coefficient, rate)` pairs.
    terms: Vec<(f64, f64)>,
}

impl ExpSum {
    pub fn new(terms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Self { terms: terms.into_iter().collect() }.normalized()
    }

    pub fn constant(c: f64) -> Self {
        Self::new([(c, 0.0)])
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|(c, a)| if *a == 0.0 { *c } else { c * (a * x).exp() }).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.terms.iter().map(|(c, a)| (c * s, *a)))
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        Self::new(
            self.terms
                .iter()
                .copied()
                .chain(other.terms.iter().map(|(c, a)| (c * s, *a))),
        )
    }

    /// `∫_lo^hi h(x) λe^{λx} dx` for `lo < hi ≤ 0`; `lo` may be `-∞`.
    pub fn integrate_exponential(&self, rate: f64, lo: f64, hi: f64) -> f64 {
        if lo >= hi {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|(c, a)| {
                let s = a + rate;
                let upper = (s * hi).exp();
                let lower = if lo == f64::NEG_INFINITY { 0.0 } else { (s * lo).exp() };
                c * rate / s * (upper - lower)
            })
            .sum()
    }

    /// Sorted sign-changing roots in the open interval `(lo, hi)`.
    ///
    /// Uses the fact that after dividing by the slowest exponential the
    /// derivative has one term fewer, so the critical points of `h` split
    /// the interval into monotone pieces.
    pub fn roots(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = roots_rec(&self.terms, lo, hi);
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + b.abs()));
        out.retain(|r| *r > lo && *r < hi);
        out
    }

    fn normalized(mut self) -> Self {
        self.terms.retain(|(c, a)| c.is_finite() && a.is_finite());
        self.terms.sort_by(|x, y| x.1.total_cmp(&y.1));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.terms.len());
        for (c, a) in self.terms {
            match merged.last_mut() {
                Some(last) if (last.1 - a).abs() <= MERGE_TOL * (1.0 + a.abs()) => last.0 += c,
                _ => merged.push((c, a)),
            }
        }
        let scale = merged.iter().map(|(c, _)| c.abs()).fold(0.0, f64::max);
        merged.retain(|(c, _)| c.abs() > 1e-15 * scale);
        Self { terms: merged }
    }
}

/// Roots of `Σ cᵢ e^{aᵢ x}` with sorted, distinct rates.
fn roots_rec(terms: &[(f64, f64)], lo: f64, hi: f64) -> Vec<f64> {
    if terms.len() <= 1 {
        return Vec::new();
    }
    let base = terms[0].1;
    let shifted: Vec<(f64, f64)> = terms.iter().map(|(c, a)| (*c, a - base)).collect();
    let derivative: Vec<(f64, f64)> =
        shifted[1..].iter().map(|(c, d)| (c * d, *d)).collect();
    let g = |x: f64| -> f64 {
        shifted.iter().map(|(c, d)| if *d == 0.0 { *c } else { c * (d * x).exp() }).sum()
    };
    let at = |x: f64| -> f64 {
        if x == f64::NEG_INFINITY {
            shifted[0].0
        } else {
            g(x)
        }
    };

    let mut knots = vec![lo];
    knots.extend(roots_rec(&derivative, lo, hi).into_iter().filter(|r| *r > lo && *r < hi));
    knots.push(hi);

    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let (mut l, r) = (w[0], w[1]);
        let (gl, gr) = (at(l), at(r));
        if gr == 0.0 && r.is_finite() {
            roots.push(r);
            continue;
        }
        if gl == 0.0 && l.is_finite() {
            roots.push(l);
            continue;
        }
        if gl.signum() == gr.signum() {
            continue;
        }
        if l == f64::NEG_INFINITY {
            let mut step = 1.0;
            l = r - step;
            while g(l).signum() == gr.signum() && step < 1e300 {
                step *= 2.0;
                l = r - step;
            }
        }
        roots.push(bisect(&g, l, r));
    }
    roots
}

fn bisect(g: &impl Fn(f64) -> f64, mut l: f64, mut r: f64) -> f64 {
    let sl = g(l).signum();
    for _ in 0..BISECT_ITERS {
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if gm.signum() == sl {
            l = m;
        } else {
            r = m;
        }
    }
    0.5 * (l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_both_roots_of_a_hump() {
        // e^{x} - e^{2x} - 0.2 vanishes where u - u² = 0.2 with u = e^x.
        let h = ExpSum::new([(1.0, 1.0), (-1.0, 2.0), (-0.2, 0.0)]);
        let roots = h.roots(f64::NEG_INFINITY, 0.0);
        let disc = (1.0f64 - 0.8).sqrt();
        let expected = [((1.0 - disc) / 2.0).ln(), ((1.0 + disc) / 2.0).ln()];
        assert_eq!(roots.len(), 2);
        for (r, e) in roots.iter().zip(expected) {
            assert!((r - e).abs() < 1e-12, "{r} vs {e}");
        }
    }

    #[test]
    fn single_term_has_no_root() {
        assert!(ExpSum::new([(3.0, 0.7)]).roots(f64::NEG_INFINITY, 0.0).is_empty());
    }

    #[test]
    fn merges_equal_rates() {
        let h = ExpSum::new([(1.0, 0.5), (2.0, 0.5), (-3.0, 0.5)]);
        assert!(h.terms().is_empty());
    }

    #[test]
    fn integral_of_constant_is_mass() {
        let h = ExpSum::constant(1.0);
        let p = h.integrate_exponential(0.25, -4.0, -1.0);
        assert!((p - ((-0.25f64).exp() - (-1.0f64).exp())).abs() < 1e-15);
    }
}
