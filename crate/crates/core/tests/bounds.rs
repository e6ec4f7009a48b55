use centroid_sec::bounds::{
    bound_infinite, displacement_finite, exact_infinite, geometric_series_closed_form, limited_moments, nu_crit,
    protected_moments, BoundParams, MixModel,
};
use proptest::prelude::*;

#[test]
fn exact_infinite_below_log_bound_up_to_a_million() {
    for n in [1u64, 10, 100, 1000] {
        // running sum so every i up to 10^6 is checked
        let mut s = 0.0f64;
        for i in 1..=1_000_000u64 {
            s += 1.0 / (n + i) as f64;
            assert!(s <= bound_infinite(i, n) * (1.0 + 1e-12), "n={n} i={i}");
        }
        let e = exact_infinite(1_000_000, n);
        assert!((e - s).abs() <= 1e-9 * s);
    }
}

#[test]
fn finite_displacement_is_linear() {
    assert_eq!(displacement_finite(0, 100), 0.0);
    assert_eq!(displacement_finite(250, 100), 2.5);
}

#[test]
fn d_below_c_over_grid() {
    let nus = [1e-4, 0.01, 0.05, 0.1, 0.25, 0.5];
    let alphas = [0.0, 0.005, 0.025, 0.05, 0.1];
    let ns = [10u64, 100, 1000, 10_000, 100_000, 1_000_000];
    let is = [0u64, 1, 7, 100, 5000, 100_000, 1_000_000];
    for &nu in &nus {
        for &a in &alphas {
            for &n in &ns {
                let m = MixModel::new(nu, a, n).unwrap();
                for &i in &is {
                    for p in [BoundParams::limited(i, &m), BoundParams::protected(i, &m)] {
                        assert!(p.d <= p.c, "nu={nu} a={a} n={n} i={i}: d={} c={}", p.d, p.c);
                        assert!(p.gamma >= 0.0);
                    }
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn limited_expectation_monotone_and_bounded(nu in 0.001..0.5f64, n in 2u64..100_000, i in 0u64..1_000_000, step in 1u64..10_000) {
        let m = MixModel::new(nu, 0.0, n).unwrap();
        let a = limited_moments(i, &m).unwrap().expectation;
        let b = limited_moments(i + step, &m).unwrap().expectation;
        prop_assert!(b >= a);
        prop_assert!(b <= nu / (1.0 - nu) * (1.0 + 1e-15));
    }

    #[test]
    fn protected_lower_below_upper(nu in 0.001..0.5f64, alpha in 0.0..0.1f64, n in 2u64..100_000, i in 0u64..1_000_000) {
        let m = MixModel::new(nu, alpha, n).unwrap();
        let p = protected_moments(i, &m).unwrap();
        prop_assert!(p.expectation_lower <= p.expectation_upper * (1.0 + 1e-14));
        let z = protected_moments(i, &MixModel::new(nu, 0.0, n).unwrap()).unwrap();
        prop_assert!((z.expectation_lower - z.expectation_upper).abs() <= 1e-15);
    }

    #[test]
    fn closed_form_matches_recursion(p in -1.0..1.0f64, q in prop_oneof![0.0..1.05f64, 0.999_99..1.000_01f64], i in 0u64..10_000) {
        let mut s = 0.0f64;
        for _ in 0..i {
            s = q * s + p;
        }
        let c = geometric_series_closed_form(p, q, i);
        prop_assert!((c - s).abs() <= 1e-12 * s.abs(), "closed {c} vs unrolled {s}");
    }

    #[test]
    fn nu_crit_inverts_asymptote(nu in 0.0..0.99f64) {
        let back = nu_crit(nu / (1.0 - nu)).unwrap();
        prop_assert!((back - nu).abs() <= 1e-12);
    }
}
