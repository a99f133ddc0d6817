// SPDX-License-Identifier: Apache-2.0
mod common;

use approx::assert_abs_diff_eq;
use rigidnet_core::defaults::{
    classify_defaults_single_shock, cycle_default_condition, exact_default_predicate, line_gap,
    line_thresholds, CycleIndexing, TiltedMoments, Verdict,
};
use rigidnet_core::scenarios::{experiment_shock, make_cycle, make_line};
use rigidnet_core::{ConditionalLaw, Economy, Error, ExpectationEngine, Leontief, NormalizedShocks, Observation, SignalModel};

const ALPHA: f64 = 0.6;
const RATE: f64 = 0.25;
const SHOCKED: usize = 1;

struct Setup {
    econ: Economy,
    leontief: Leontief,
    law: ConditionalLaw,
    expected: Vec<f64>,
}

fn setup(econ: Economy, engine: ExpectationEngine) -> Setup {
    let leontief = Leontief::new(&econ).unwrap();
    let law = engine.condition(&experiment_shock(4), &SignalModel::None, &Observation::Constant).unwrap();
    let expected = law.expected_exp_rho(&leontief);
    Setup { econ, leontief, law, expected }
}

fn line() -> Setup {
    setup(make_line(4, ALPHA, None).unwrap(), ExpectationEngine::analytic())
}

fn cycle() -> Setup {
    setup(make_cycle(4, ALPHA, None).unwrap(), ExpectationEngine::analytic())
}

impl Setup {
    fn verdicts(&self, eta_o: f64) -> Vec<Verdict> {
        classify_defaults_single_shock(&self.econ, &self.leontief, &self.law, SHOCKED, eta_o).unwrap().verdicts()
    }

    fn shocks(&self, eta_o: f64) -> NormalizedShocks {
        let mut eta = vec![0.0; 4];
        eta[SHOCKED] = eta_o;
        NormalizedShocks::new(&self.econ, &self.leontief, &self.expected, &eta).unwrap()
    }

    fn defaults(&self, eta_o: f64, k: usize) -> bool {
        let s = self.shocks(eta_o);
        exact_default_predicate(&s.tau, &s.epsilon, k)
    }
}

#[test]
fn exponential_tilted_moments() {
    let s = line();
    let tilted = TiltedMoments::new(&s.law, SHOCKED);
    for i in 0..=40 {
        let t = i as f64 * 0.25;
        let m = tilted.at(t);
        assert_abs_diff_eq!(m.m1, -1.0 / (t + RATE), epsilon = 1e-12);
        assert_abs_diff_eq!(m.sigma, 1.0 / (t + RATE), epsilon = 1e-10);

        let z = common::exponential_expectation(|x| (t * x).exp(), RATE);
        let m1 = common::exponential_expectation(|x| x * (t * x).exp(), RATE) / z;
        let m2 = common::exponential_expectation(|x| x * x * (t * x).exp(), RATE) / z;
        assert_abs_diff_eq!(m.m1, m1, epsilon = 1e-10);
        assert_abs_diff_eq!(m.m2, m2, epsilon = 1e-10);
        assert!(m.m2 - m.m1 * m.m1 >= 0.0);
    }
}

#[test]
fn tilted_moments_of_a_discrete_law() {
    let mut rng = common::rng(5);
    let model = common::random_single_node_support(&mut rng, 4, SHOCKED);
    let law = ExpectationEngine::exact().condition(&model, &SignalModel::None, &Observation::Constant).unwrap();
    let rigidnet_core::ShockModel::Discrete { support } = &model else { unreachable!() };
    let tilted = TiltedMoments::new(&law, SHOCKED);
    for t in [0.0, 0.5, 3.0, 10.0] {
        let z: f64 = support.iter().map(|p| p.prob * (t * p.eta[SHOCKED]).exp()).sum();
        let m1: f64 = support.iter().map(|p| p.prob * p.eta[SHOCKED] * (t * p.eta[SHOCKED]).exp()).sum::<f64>() / z;
        let m2: f64 = support.iter().map(|p| p.prob * p.eta[SHOCKED].powi(2) * (t * p.eta[SHOCKED]).exp()).sum::<f64>() / z;
        let m = tilted.at(t);
        assert_abs_diff_eq!(m.m1, m1, epsilon = 1e-12);
        assert_abs_diff_eq!(m.m2, m2, epsilon = 1e-12);
        assert_abs_diff_eq!(m.sigma * m.sigma, m2 - m1 * m1, epsilon = 1e-10);
    }
}

#[test]
fn deep_shock_defaults_everyone_downstream() {
    // η_o = -10 lies below -2/λ = -8.
    for s in [line(), cycle()] {
        let v = s.verdicts(-10.0);
        for k in 0..4 {
            if s.leontief.get(k, SHOCKED) > 0.0 {
                assert_eq!(v[k], Verdict::Default, "sector {k}: {v:?}");
                assert!(s.defaults(-10.0, k));
            } else {
                assert_eq!(v[k], Verdict::Never);
            }
        }
    }
}

#[test]
fn moderate_shock_spares_close_customers() {
    // η_o = -1: NO_DEFAULT wherever L⁻_k ≤ -2/η_o - λ = 1.75.
    for s in [line(), cycle()] {
        let c = classify_defaults_single_shock(&s.econ, &s.leontief, &s.law, SHOCKED, -1.0).unwrap();
        assert!(c.t_bar.unwrap() >= 1.75 - 1e-8);
        for (k, sv) in c.sectors.iter().enumerate() {
            if k != SHOCKED && sv.exposure > 0.0 && sv.l_minus <= 1.75 {
                assert_eq!(sv.verdict, Verdict::NoDefault, "sector {k}");
            }
        }
    }
}

#[test]
fn shocked_line_sector_defaults_below_its_mean() {
    let s = line();
    let cut = (RATE / (1.0 + RATE)).ln();
    assert_eq!(s.verdicts(cut + 1e-9)[SHOCKED], Verdict::NoDefault);
    assert_eq!(s.verdicts(cut - 1e-9)[SHOCKED], Verdict::Default);
    assert_eq!(s.verdicts(0.0)[SHOCKED], Verdict::NoDefault);
    assert_eq!(s.verdicts(-2.0)[0], Verdict::Never);
    assert!(!s.defaults(0.0, SHOCKED));
    assert!(s.defaults(-2.0, SHOCKED));
}

#[test]
fn exact_predicate_examples() {
    let s = line();
    let sh = s.shocks(-2.0);
    assert_abs_diff_eq!(sh.tau[SHOCKED], 0.6767, epsilon = 1e-4);
    assert!(exact_default_predicate(&sh.tau, &sh.epsilon, SHOCKED));
    let sh = s.shocks(0.0);
    assert_abs_diff_eq!(sh.tau[SHOCKED], 5.0, epsilon = 1e-12);
    assert!(!exact_default_predicate(&sh.tau, &sh.epsilon, SHOCKED));
    let ones = [1.0; 4];
    assert!((0..4).all(|k| !exact_default_predicate(&ones, &ones, k)));
}

#[test]
fn line_thresholds_closed_form_and_ordering() {
    let x = line_thresholds(4, ALPHA, RATE).unwrap();
    assert_eq!(x[0], None);
    let x2 = x[1].unwrap();
    assert_abs_diff_eq!(x2, 0.2f64.ln(), epsilon = 1e-15);
    assert_abs_diff_eq!((RATE * x2).exp(), 0.2f64.powf(0.25), epsilon = 1e-15);
    assert_abs_diff_eq!((RATE * x2).exp(), 0.6687, epsilon = 1e-4);
    let x3 = x[2].unwrap();
    assert_abs_diff_eq!((RATE * x3).exp(), 0.4641, epsilon = 2e-3);
    for k in 2..4 {
        let xk = x[k].unwrap();
        assert!(xk <= x2 && xk < 0.0);
        assert_abs_diff_eq!(line_gap(k - 1, ALPHA, RATE, xk), RATE * (1.0 - ALPHA), epsilon = 1e-10);
    }
    assert!(x[3].unwrap() <= x3);
    // Thresholds agree with the exact predicate on both sides.
    let s = line();
    for k in 1..4 {
        let xk = x[k].unwrap();
        assert!(s.defaults(xk - 1e-6, k), "sector {k}");
        assert!(!s.defaults(xk + 1e-6, k), "sector {k}");
    }
}

#[test]
fn degenerate_alpha_is_rejected() {
    for alpha in [0.0, 1.0, -0.2, 1.5] {
        assert!(matches!(line_thresholds(4, alpha, RATE), Err(Error::InvalidAlpha(_))));
    }
    assert!(line_thresholds(4, ALPHA, 0.0).is_err());
}

#[test]
fn cycle_condition_needs_a_shock() {
    for indexing in [CycleIndexing::Distance, CycleIndexing::Literal] {
        for d in 0..4 {
            assert!(!cycle_default_condition(ALPHA, RATE, 4, d, 0.0, indexing));
        }
    }
}

#[test]
fn cycle_condition_against_the_exact_predicate() {
    let s = cycle();
    let grid: Vec<f64> = (1..=400).map(|i| -0.05 * i as f64).collect();
    let mismatches = |indexing| {
        (0..4)
            .flat_map(|d| grid.iter().map(move |&x| (d, x)))
            .filter(|&(d, x)| cycle_default_condition(ALPHA, RATE, 4, d, x, indexing) != s.defaults(x, (SHOCKED + d) % 4))
            .count()
    };
    let distance = mismatches(CycleIndexing::Distance);
    let literal = mismatches(CycleIndexing::Literal);
    println!("cycle condition mismatches over {} points: distance {distance}, literal {literal}", 4 * grid.len());
    assert_eq!(distance, 0);
}

#[test]
fn cycle_customers_far_downstream_need_deeper_shocks() {
    let boundary = |d: usize| {
        let grid = (1..=4000).map(|i| -0.005 * i as f64);
        grid.into_iter().find(|&x| cycle_default_condition(ALPHA, RATE, 4, d, x, CycleIndexing::Distance))
    };
    let b1 = boundary(1).unwrap();
    let b2 = boundary(2).unwrap();
    let b3 = boundary(3).unwrap();
    assert!(b2 < b1 && b3 < b2, "{b1} {b2} {b3}");
}

#[test]
fn verdicts_never_contradict_realized_defaults() {
    for s in [line(), cycle()] {
        let ConditionalLaw::Exponential(_) = &s.law else { unreachable!() };
        let mc = ExpectationEngine::monte_carlo(2_000, 11)
            .condition(&experiment_shock(4), &SignalModel::None, &Observation::Constant)
            .unwrap();
        let ConditionalLaw::Sample(sample) = &mc else { unreachable!() };
        for (eta, _) in sample.iter() {
            let x = eta[SHOCKED];
            let v = s.verdicts(x);
            for k in 0..4 {
                let d = s.defaults(x, k);
                match v[k] {
                    Verdict::Default => assert!(d, "eta {x} sector {k}"),
                    Verdict::NoDefault | Verdict::Never => assert!(!d, "eta {x} sector {k}"),
                    Verdict::Undetermined => {}
                }
            }
        }
    }
}

#[test]
fn line_cascades_run_downstream_in_order() {
    let s = line();
    let mc = ExpectationEngine::monte_carlo(100_000, 12)
        .condition(&experiment_shock(4), &SignalModel::None, &Observation::Constant)
        .unwrap();
    let ConditionalLaw::Sample(sample) = &mc else { unreachable!() };
    let thresholds = line_thresholds(4, ALPHA, RATE).unwrap();
    let mut hits = [0usize; 4];
    for (eta, _) in sample.iter() {
        let d: Vec<bool> = (0..4).map(|k| s.defaults(eta[SHOCKED], k)).collect();
        for k in 1..3 {
            assert!(!d[k + 1] || d[k], "eta {eta:?}");
        }
        for k in 0..4 {
            hits[k] += usize::from(d[k]);
        }
    }
    let m = sample.len() as f64;
    assert_eq!(hits[0], 0);
    for k in 1..4 {
        let p = (RATE * thresholds[k].unwrap()).exp();
        let freq = hits[k] as f64 / m;
        let se = (p * (1.0 - p) / m).sqrt();
        assert!((freq - p).abs() <= 3.0 * se, "sector {k}: {freq} vs {p}");
    }
}

#[test]
fn multi_node_laws_are_not_classified() {
    let s = line();
    let model = rigidnet_core::ShockModel::IndependentExponential { rates: vec![1.0; 4] };
    let law = ExpectationEngine::monte_carlo(1_000, 1).condition(&model, &SignalModel::None, &Observation::Constant).unwrap();
    assert!(matches!(
        classify_defaults_single_shock(&s.econ, &s.leontief, &law, SHOCKED, -1.0),
        Err(Error::UnsupportedShock)
    ));
}
