// SPDX-License-Identifier: Apache-2.0
mod common;

use approx::assert_abs_diff_eq;
use rigidnet_core::scenarios::{experiment_shock, make_line};
use rigidnet_core::shocks::{supplier_shocks, total_shock};
use rigidnet_core::{
    BoxCell, Economy, Error, ExpectationEngine, Interval, Leontief, Observation, ShockModel,
    SignalModel, SupportPoint,
};

const RATE: f64 = 0.25;

fn line() -> (Economy, Leontief) {
    let econ = make_line(4, 0.6, None).unwrap();
    let l = Leontief::new(&econ).unwrap();
    (econ, l)
}

fn eta2(x: f64) -> Vec<f64> {
    vec![0.0, x, 0.0, 0.0]
}

#[test]
fn total_shock_propagates_downstream() {
    let (_, l) = line();
    let rho = total_shock(&l, &eta2(-1.0)).unwrap();
    let expected = [0.0, -1.0, -0.6, -0.36];
    assert!(common::max_abs_diff(&rho, &expected) < 1e-15);
    assert!(matches!(total_shock(&l, &[0.0; 3]), Err(Error::DimensionMismatch(_))));
}

#[test]
fn conditional_expectations_match_quadrature() {
    let (_, l) = line();
    let model = experiment_shock(4);
    let law = ExpectationEngine::analytic()
        .condition(&model, &SignalModel::None, &Observation::Constant)
        .unwrap();
    let e = law.expected_exp_rho(&l);
    assert_eq!(e[0], 1.0);
    assert_abs_diff_eq!(e[1], 0.2, epsilon = 1e-12);
    assert_abs_diff_eq!(e[2], 0.294118, epsilon = 1e-6);
    for (k, scale) in [(1, 1.0), (2, 0.6), (3, 0.36)] {
        let oracle = common::exponential_expectation(|x| (scale * x).exp(), RATE);
        assert_abs_diff_eq!(e[k], oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(e[k], RATE / (RATE + scale), epsilon = 1e-12);
    }
}

#[test]
fn normalized_shocks_on_the_line() {
    let (econ, l) = line();
    let model = experiment_shock(4);
    let engine = ExpectationEngine::analytic();
    for x in [0.0, -0.3, -2.0, -7.5] {
        let s = engine.normalized_shocks(&econ, &l, &model, &SignalModel::None, &eta2(x)).unwrap();
        assert_abs_diff_eq!(s.tau[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.tau[1], 5.0 * x.exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.tau[2], 3.4 * (0.6 * x).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.epsilon[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.epsilon[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.epsilon[2], 0.4 + 0.6 * s.tau[1], epsilon = 1e-12);
    }
}

#[test]
fn full_signal_normalizes_to_one() {
    let (econ, l) = line();
    let model = experiment_shock(4);
    let eta = eta2(-1.3);
    let law = ExpectationEngine::analytic()
        .condition(&model, &SignalModel::Full, &Observation::Exact(eta.clone()))
        .unwrap();
    let e = law.expected_exp_rho(&l);
    let rho = total_shock(&l, &eta).unwrap();
    for (a, r) in e.iter().zip(&rho) {
        assert_abs_diff_eq!(*a, r.exp(), epsilon = 1e-15);
    }
    let s = ExpectationEngine::analytic()
        .normalized_shocks(&econ, &l, &model, &SignalModel::Full, &eta)
        .unwrap();
    assert!(s.tau.iter().chain(&s.epsilon).all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn two_point_law_without_information() {
    let econ = Economy::from_rows(&[vec![0.0, 0.5], vec![0.0, 0.0]], vec![0.5, 0.5], vec![0.0, 0.0]).unwrap();
    let l = Leontief::new(&econ).unwrap();
    let model = ShockModel::Discrete {
        support: vec![SupportPoint::new(vec![0.0, 0.0], 0.5), SupportPoint::new(vec![-1.0, 0.0], 0.5)],
    };
    let law = ExpectationEngine::exact()
        .condition(&model, &SignalModel::None, &Observation::Constant)
        .unwrap();
    let e = law.expected_exp_rho(&l);
    let m1 = 0.5 + 0.5 * (-1.0f64).exp();
    let m2 = 0.5 + 0.5 * (-0.5f64).exp();
    assert_abs_diff_eq!(e[0], m1, epsilon = 1e-15);
    assert_abs_diff_eq!(e[1], m2, epsilon = 1e-15);
    let bad = total_shock(&l, &[-1.0, 0.0]).unwrap();
    let tau: Vec<f64> = bad.iter().zip(&e).map(|(r, m)| r.exp() / m).collect();
    let eps = supplier_shocks(&econ, &tau);
    assert_abs_diff_eq!(eps[1], 0.5 + 0.5 * tau[0], epsilon = 1e-15);
}

#[test]
fn normalized_shocks_average_to_one_on_discrete_laws() {
    for seed in 0..20 {
        let mut rng = common::rng(seed);
        let n = 2 + (seed as usize % 4);
        let econ = common::random_economy(&mut rng, n);
        let l = Leontief::new(&econ).unwrap();
        let model = common::random_support(&mut rng, n);
        let ShockModel::Discrete { support } = &model else { unreachable!() };
        let engine = ExpectationEngine::exact();
        let law = engine.condition(&model, &SignalModel::None, &Observation::Constant).unwrap();
        let expected = law.expected_exp_rho(&l);
        let mut tau_mean = vec![0.0; n];
        let mut eps_mean = vec![0.0; n];
        for p in support {
            let s = rigidnet_core::NormalizedShocks::new(&econ, &l, &expected, &p.eta).unwrap();
            for k in 0..n {
                tau_mean[k] += p.prob * s.tau[k];
                eps_mean[k] += p.prob * s.epsilon[k];
            }
        }
        assert!(tau_mean.iter().chain(&eps_mean).all(|m| (m - 1.0).abs() < 1e-12), "seed {seed}");
    }
}

#[test]
fn normalized_shocks_average_to_one_under_sampling() {
    let (econ, l) = line();
    let model = experiment_shock(4);
    let law = ExpectationEngine::monte_carlo(200_000, 7)
        .condition(&model, &SignalModel::None, &Observation::Constant)
        .unwrap();
    // Normalize by the closed-form expectations; the sample mean of τ then
    // estimates one with the usual standard error.
    let exact: Vec<f64> = (0..4).map(|k| RATE / (RATE + l.get(k, 1))).collect();
    for k in 0..4 {
        let tau = law.expect(|eta| total_shock(&l, eta).unwrap()[k].exp() / exact[k]);
        let eps = law.expect(|eta| {
            let rho = total_shock(&l, eta).unwrap();
            let t: Vec<f64> = rho.iter().zip(&exact).map(|(r, m)| r.exp() / m).collect();
            supplier_shocks(&econ, &t)[k]
        });
        for est in [tau, eps] {
            assert!((est.value - 1.0).abs() <= 3.0 * est.std_err + 1e-12, "sector {k}: {est:?}");
        }
    }
}

#[test]
fn monte_carlo_draws_do_not_depend_on_thread_count() {
    let model = experiment_shock(4);
    let (_, l) = line();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let law = ExpectationEngine::monte_carlo(100_000, 42)
                .condition(&model, &SignalModel::None, &Observation::Constant)
                .unwrap();
            law.expected_exp_rho_with_err(&l)
        })
    };
    let one = run(1);
    let four = run(4);
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }
}

#[test]
fn partition_conditions_on_the_observed_cell() {
    let (_, l) = line();
    let model = experiment_shock(4);
    let cut = -2.0;
    let cell = |lo: Option<f64>, hi: Option<f64>| {
        let mut b = BoxCell::unbounded(4);
        b.bounds[1] = Interval::new(lo, hi);
        b
    };
    let signal = SignalModel::Partition { cells: vec![cell(None, Some(cut)), cell(Some(cut), None)] };
    signal.validate(&model).unwrap();
    assert_eq!(signal.observe(&eta2(-3.0)), Observation::Cell(0));
    assert_eq!(signal.observe(&eta2(-1.0)), Observation::Cell(1));

    let engine = ExpectationEngine::analytic();
    let upper = engine.condition(&model, &signal, &Observation::Cell(1)).unwrap();
    let mass = 1.0 - (RATE * cut).exp();
    let oracle = common::simpson(|x| x.exp() * RATE * (RATE * x).exp(), cut, 0.0, 20_000) / mass;
    assert_abs_diff_eq!(upper.expected_exp_rho(&l)[1], oracle, epsilon = 1e-10);

    let mc = ExpectationEngine::monte_carlo(200_000, 3).condition(&model, &signal, &Observation::Cell(1)).unwrap();
    let est = mc.expected_exp_rho_with_err(&l)[1];
    assert!((est.value - oracle).abs() < 4.0 * est.std_err);
}

#[test]
fn invalid_laws_are_rejected() {
    let bad_rate = ShockModel::SingleNodeExponential { n: 4, sector: 1, rate: 0.0 };
    assert!(matches!(bad_rate.validate(), Err(Error::InvalidShock(_))));
    let bad_sector = ShockModel::SingleNodeExponential { n: 4, sector: 4, rate: 1.0 };
    assert!(matches!(bad_sector.validate(), Err(Error::SectorOutOfRange { .. })));
    let positive = ShockModel::Discrete {
        support: vec![SupportPoint::new(vec![0.1], 0.5), SupportPoint::new(vec![0.0], 0.5)],
    };
    assert!(matches!(positive.validate(), Err(Error::InvalidShock(_))));
    let short = ShockModel::Discrete {
        support: vec![SupportPoint::new(vec![0.0], 0.4), SupportPoint::new(vec![-1.0], 0.5)],
    };
    assert!(matches!(short.validate(), Err(Error::InvalidShock(_))));
    let ragged = ShockModel::Discrete {
        support: vec![SupportPoint::new(vec![0.0], 0.5), SupportPoint::new(vec![-1.0, 0.0], 0.5)],
    };
    assert!(matches!(ragged.validate(), Err(Error::DimensionMismatch(_))));
    let degenerate = ShockModel::Degenerate { eta: vec![-1.0, 0.0] };
    assert_eq!(degenerate.validate().unwrap().len(), 1);

    let model = experiment_shock(4);
    let overlapping = SignalModel::Partition {
        cells: vec![BoxCell::unbounded(4), BoxCell::unbounded(4)],
    };
    assert!(matches!(overlapping.validate(&model), Err(Error::InvalidSignal(_))));
    let independent = ShockModel::IndependentExponential { rates: vec![1.0; 4] };
    assert!(matches!(
        ExpectationEngine::analytic().condition(&independent, &SignalModel::None, &Observation::Constant),
        Err(Error::UnsupportedAnalytic(_))
    ));
    assert!(matches!(
        ExpectationEngine::exact().condition(&model, &SignalModel::None, &Observation::Constant),
        Err(Error::UnsupportedAnalytic(_))
    ));
}
