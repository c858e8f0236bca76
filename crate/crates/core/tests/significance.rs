//! McNemar's test against numerical integration of the normal density.

use approx::assert_abs_diff_eq;
use cotag::eval::{mcnemar_from_counts, mcnemar_significance};
use proptest::prelude::*;

/// P(chi-square with one degree of freedom > x) = 2 P(Z > sqrt x), by Simpson's rule.
fn chi2_tail(x: f64) -> f64 {
    let lo = x.sqrt();
    let hi = lo + 40.0;
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(lo) + phi(hi);
    for k in 1..n {
        let z = lo + k as f64 * h;
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * phi(z);
    }
    2.0 * s * h / 3.0
}

#[test]
fn fifteen_to_nothing() {
    let m = mcnemar_from_counts(15, 0, 0.05);
    assert_abs_diff_eq!(m.statistic, 196.0 / 15.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.statistic, 13.07, epsilon = 0.01);
    assert_abs_diff_eq!(m.p_value, chi2_tail(m.statistic), epsilon = 1e-10);
    assert!(m.p_value < 0.001 && m.p_value > 0.0002);
    assert!(m.significant);
}

#[test]
fn no_discordance_and_near_balance() {
    let v = vec![true, false, true, true];
    let m = mcnemar_significance(&v, &v, 0.05).unwrap();
    assert_eq!((m.b, m.c), (0, 0));
    assert_eq!(m.p_value, 1.0);
    assert!(!m.significant);
    let m = mcnemar_from_counts(5, 4, 0.05);
    assert_eq!(m.statistic, 0.0);
    assert_eq!(m.p_value, 1.0);
}

#[test]
fn counts_from_vectors() {
    // first tagger alone wrong at 3 tokens, second alone wrong at 1
    let a = [false, false, false, true, true, false];
    let b = [true, true, true, false, true, false];
    let m = mcnemar_significance(&a, &b, 0.05).unwrap();
    assert_eq!((m.b, m.c), (3, 1));
    assert_abs_diff_eq!(m.statistic, 1.0 / 4.0, epsilon = 1e-15);
    assert!(mcnemar_significance(&a, &b[..5], 0.05).is_err());
}

proptest! {
    #[test]
    fn p_value_matches_quadrature(b in 0usize..400, c in 0usize..400) {
        let m = mcnemar_from_counts(b, c, 0.05);
        let d = (b as f64 - c as f64).abs();
        let want = if b + c == 0 { 0.0 } else { (d - 1.0).max(0.0).powi(2) / (b + c) as f64 };
        prop_assert!((m.statistic - want).abs() <= 1e-9 * (1.0 + want));
        prop_assert!((0.0..=1.0).contains(&m.p_value));
        if m.statistic < 60.0 {
            prop_assert!((m.p_value - chi2_tail(m.statistic)).abs() < 1e-9);
        }
        prop_assert_eq!(m.significant, m.p_value < 0.05);
        let swapped = mcnemar_from_counts(c, b, 0.05);
        prop_assert_eq!(swapped.p_value, m.p_value);
    }
}
