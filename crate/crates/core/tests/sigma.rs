//! Gaussian tail and sigma conversions against an independent erfc.

use gridrel_core::metrics::INDUSTRIAL_SHIFT;
use gridrel_core::tail::{erfc, upper_tail};
use gridrel_core::{rate_from_sigma, sigma_from_rate, SigmaConvention};
use proptest::prelude::*;

/// One-sided tail through statrs, which shares no code with ours.
fn oracle_tail(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn erfc_matches_oracle() {
    let mut x = -6.0;
    while x <= 26.0 {
        let (ours, theirs) = (erfc(x), statrs::function::erf::erfc(x));
        // statrs is only good to ~1e-10 in places; the table below is the tight check
        assert!(rel(ours, theirs) < 1e-9, "x={x}: {ours} vs {theirs}");
        x += 0.037;
    }
}

#[test]
fn tail_matches_high_precision_values() {
    // Q(z) to 15 digits, computed with 30-digit arithmetic.
    let table = [
        (0.5, 0.308_537_538_725_987),
        (1.0, 0.158_655_253_931_457),
        (3.0, 1.349_898_031_630_095e-3),
        (4.5, 3.397_673_124_730_06e-6),
        (5.0, 2.866_515_718_791_939e-7),
        (6.0, 9.865_876_450_376_98e-10),
        (8.0, 6.220_960_574_271_784e-16),
    ];
    for (z, q) in table {
        assert!(rel(upper_tail(z), q) < 1e-13, "z={z}");
        assert!(rel(oracle_tail(z), q) < 1e-9, "oracle z={z}");
    }
}

#[test]
fn five_sigma_anchor() {
    let z = sigma_from_rate(2.87e-7, SigmaConvention::Mathematical).unwrap();
    assert!((z - 5.00).abs() < 5e-3, "{z}");
    let z = sigma_from_rate(3e-7, SigmaConvention::Mathematical).unwrap();
    assert!((4.99..=5.02).contains(&z), "{z}");
    assert!((z - 4.991_217_139_907_697).abs() < 1e-9);

    let p = rate_from_sigma(5.0, SigmaConvention::Mathematical).unwrap();
    assert!(rel(p, oracle_tail(5.0)) < 1e-10);
    assert!((p - 2.87e-7).abs() < 0.005e-7);
}

#[test]
fn industrial_six_sigma() {
    let p = rate_from_sigma(6.0, SigmaConvention::Industrial).unwrap();
    assert!(rel(p, oracle_tail(4.5)) < 1e-10);
    assert!(rel(p, 3.40e-6) < 0.01, "{p}");

    let s = sigma_from_rate(3.40e-6, SigmaConvention::Industrial).unwrap();
    assert!((s - 6.00).abs() < 5e-3, "{s}");
    assert!((s - (4.499_854_470_025_007 + 1.5)).abs() < 1e-9);
}

#[test]
fn six_mathematical_sigma_is_below_ten_to_minus_eight() {
    let q6 = rate_from_sigma(6.0, SigmaConvention::Mathematical).unwrap();
    assert!(q6 < 1e-8);
    assert!(rel(q6, 9.865_876_450_376_98e-10) < 1e-12);
    let z = sigma_from_rate(1e-8, SigmaConvention::Mathematical).unwrap();
    assert!((z - 5.612_001_244_174_789).abs() < 1e-9);
}

#[test]
fn rates_above_half_give_negative_sigma() {
    let z = sigma_from_rate(0.841_344_746_068_543, SigmaConvention::Mathematical).unwrap();
    assert!((z + 1.0).abs() < 1e-9);
}

proptest! {
    #[test]
    fn round_trip_over_sigma_range(sigma in 0.5f64..8.0) {
        for conv in [SigmaConvention::Mathematical, SigmaConvention::Industrial] {
            let shifted = match conv {
                SigmaConvention::Mathematical => sigma,
                SigmaConvention::Industrial => sigma + INDUSTRIAL_SHIFT,
            };
            let rate = rate_from_sigma(shifted, conv).unwrap();
            prop_assert!(rel(rate, oracle_tail(sigma)) < 1e-9);
            let back = sigma_from_rate(rate, conv).unwrap();
            prop_assert!(rel(back, shifted) < 1e-6);
        }
    }

    #[test]
    fn industrial_minus_mathematical_is_exact_shift(log_rate in -20.0f64..-0.31) {
        let rate = 10f64.powf(log_rate);
        let m = sigma_from_rate(rate, SigmaConvention::Mathematical).unwrap();
        let i = sigma_from_rate(rate, SigmaConvention::Industrial).unwrap();
        // exact up to the rounding of one addition
        prop_assert!((i - m - INDUSTRIAL_SHIFT).abs() <= 8.0 * f64::EPSILON * m.abs().max(1.0));
    }

    #[test]
    fn strictly_decreasing(a in 1e-12f64..0.99, b in 1e-12f64..0.99) {
        prop_assume!(a < b * (1.0 - 1e-9));
        let za = sigma_from_rate(a, SigmaConvention::Mathematical).unwrap();
        let zb = sigma_from_rate(b, SigmaConvention::Mathematical).unwrap();
        prop_assert!(za > zb);
        let qa = rate_from_sigma(za, SigmaConvention::Mathematical);
        let qb = rate_from_sigma(zb, SigmaConvention::Mathematical);
        if let (Ok(qa), Ok(qb)) = (qa, qb) {
            prop_assert!(qa < qb);
        }
    }
}
