// SPDX-License-Identifier: Apache-2.0
mod common;

use approx::assert_abs_diff_eq;
use rigidnet_core::scenarios::{golden, make_cycle, make_line, reproduce, TableId};
use rigidnet_core::{Error, Leontief};

#[test]
fn line_wiring() {
    let econ = make_line(4, 0.6, None).unwrap();
    for j in 0..4 {
        for k in 0..4 {
            let expected = if k == j + 1 { 0.6 } else { 0.0 };
            assert_eq!(econ.input_share(j, k), expected);
        }
    }
    assert_eq!(econ.consumption_weights(), &[0.25; 4]);
    assert_eq!(econ.labor_shares()[0], 1.0);

    let two = make_line(2, 0.3, Some(vec![0.9, 0.1])).unwrap();
    assert_eq!(two.io_rows(), vec![vec![0.0, 0.3], vec![0.0, 0.0]]);
    assert_eq!(two.consumption_weights(), &[0.9, 0.1]);
}

#[test]
fn cycle_wiring() {
    let econ = make_cycle(4, 0.6, None).unwrap();
    assert_eq!(econ.input_share(3, 0), 0.6);
    assert!(econ.labor_shares().iter().all(|b| (b - 0.4).abs() < 1e-15));
    let two = make_cycle(2, 0.5, None).unwrap();
    assert_eq!(two.io_rows(), vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
}

#[test]
fn invalid_chain_parameters() {
    for alpha in [0.0, 1.0, 1.2, f64::NAN] {
        assert!(matches!(make_line(4, alpha, None), Err(Error::InvalidAlpha(_))));
        assert!(matches!(make_cycle(4, alpha, None), Err(Error::InvalidAlpha(_))));
    }
    assert!(make_line(1, 0.5, None).is_err());
}

#[test]
fn cycle_leontief_is_circulant() {
    for (n, alpha) in [(3, 0.4), (4, 0.6), (6, 0.9)] {
        let econ = make_cycle(n, alpha, None).unwrap();
        let l = Leontief::new(&econ).unwrap();
        let oracle = common::leontief_oracle(&econ);
        let scale = 1.0 / (1.0 - f64::powi(alpha, n as i32));
        for k in 0..n {
            for j in 0..n {
                let d = (k + n - j) % n;
                assert_abs_diff_eq!(l.get(k, j), scale * alpha.powi(d as i32), epsilon = 1e-12);
                assert_abs_diff_eq!(l.get(k, j), oracle[k][j], epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn finance_tables_reproduce() {
    for table in [TableId::LineFinance, TableId::CycleFinance] {
        let r = reproduce(table, 10_000, 42).unwrap();
        assert_eq!(r.cells.len(), golden(table).len());
        let failed: Vec<_> = r.failures().map(|c| (c.golden, c.computed)).collect();
        assert!(r.passed(), "table {}: {failed:?}", table.label());
        assert!(r.render().contains("PASS"));
    }
}

#[test]
fn line_cascades_reproduce() {
    let r = reproduce(TableId::LineCascades, 200_000, 42).unwrap();
    let failed: Vec<_> = r.failures().map(|c| (c.golden, c.computed, c.tolerance)).collect();
    assert!(r.passed(), "{failed:?}");
    assert!(r.cells.iter().filter(|c| c.golden.value > 0.0).all(|c| c.std_err > 0.0));
}

#[test]
fn table_ids_round_trip() {
    for t in TableId::ALL {
        assert_eq!(t.label().parse::<TableId>().unwrap(), t);
        assert!(!golden(t).is_empty());
    }
    assert!(TableId::LineProfits.is_simulated());
    assert!(!TableId::LineQuantities.is_simulated());
    assert!(matches!("9".parse::<TableId>(), Err(Error::UnknownTable(_))));
}
