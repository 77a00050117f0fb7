use std::f64::consts::PI;

use num_rational::Ratio;
use num_traits::ToPrimitive;

use densepoly::linkstates::{RhoParity, SeamLayout};
use densepoly::scaling::{
    boundary_free_energy, bulk_free_energy, bulk_free_energy_with, kac_data, normalized_boundary_energy,
    quadrature_rules, FIT_PROBE,
};
use densepoly::spectra::{groundstate_pattern, pattern_energy, pattern_value};

/// `-(2G - (pi/2) ln 2) / pi`, `G` Catalan's constant.
const F_BULK_QUARTER: f64 = -0.236_548_217_781_664_905_6;

#[test]
fn bulk_free_energy_reference() {
    assert!((bulk_free_energy(PI / 4.0).unwrap() - F_BULK_QUARTER).abs() < 1e-12);
    let rules = quadrature_rules();
    for name in rules.names() {
        let f = bulk_free_energy_with(rules.get(name).unwrap(), PI / 4.0).unwrap();
        assert!((f - F_BULK_QUARTER).abs() < 1e-12, "{name}");
    }
    assert!(rules.get("simpson").is_err());
}

#[test]
fn four_case_boundary_form() {
    let u = FIT_PROBE;
    let f = bulk_free_energy(u).unwrap();
    let edge = (2.0 * u).sin().ln_1p();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-14;
    assert!(close(
        boundary_free_energy(u, RhoParity::Even, true).unwrap(),
        -2.0 * f - edge
    ));
    assert!(close(
        boundary_free_energy(u, RhoParity::Odd, true).unwrap(),
        -4.0 * f - edge
    ));
}

/// Conformal amplitude `-c/24 + Delta` carried by the groundstate pattern.
fn amplitude(l: SeamLayout) -> f64 {
    let e = pattern_energy(&groundstate_pattern(l), l.s_is_odd());
    let base = if l.s_is_odd() {
        Ratio::new(1, 12)
    } else {
        Ratio::new(1, 12) - Ratio::new(1, 8)
    };
    (e + base).to_f64().unwrap()
}

#[test]
fn groundstate_amplitude_is_kac_weight() {
    for (r, s) in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (2, 4)] {
        let l = SeamLayout::from_kac(20, r, s, RhoParity::Even)
            .or_else(|_| SeamLayout::from_kac(21, r, s, RhoParity::Even))
            .unwrap();
        let delta = kac_data(r, s).unwrap().delta.to_f64().unwrap();
        assert!((amplitude(l) - (1.0 / 12.0 + delta)).abs() < 1e-15, "({r},{s})");
    }
}

#[test]
fn euler_maclaurin_remainder_is_second_order() {
    let u = FIT_PROBE;
    let x = (2.0 * u).sin();
    let f = bulk_free_energy(u).unwrap();
    for (r, s) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        for parity in [RhoParity::Even, RhoParity::Odd] {
            let scaled: Vec<f64> = (20..=240)
                .filter_map(|n| SeamLayout::from_kac(n, r, s, parity).ok())
                .map(|l| {
                    let n = l.n_bulk as f64;
                    let e = -pattern_value(&groundstate_pattern(l), u, l.n_bulk, l.s_is_odd()).ln();
                    let rest = e
                        - 2.0 * n * f
                        - normalized_boundary_energy(u, parity).unwrap()
                        - 2.0 * PI * x / n * amplitude(l);
                    n * n * rest
                })
                .collect();
            let first = scaled[0];
            let last = *scaled.last().unwrap();
            assert!(scaled.iter().all(|v| v.abs() < 20.0), "({r},{s}) {parity}: {scaled:?}");
            // Bounded and settling: the tail moves much less than the head.
            assert!(
                (last - scaled[scaled.len() - 2]).abs() < 0.05 * (first - scaled[1]).abs().max(1e-3),
                "({r},{s}) {parity}"
            );
        }
    }
}
