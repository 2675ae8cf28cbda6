//! Property tests for invariants that must hold at every parameter point.

mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use wva_core::hypothesis::*;
use wva_core::probe::{self, Mode, NoiseModel, ProbeDistribution};
use wva_core::{success_probability, MeasurementSetup, TwoStateVector};

fn state() -> impl Strategy<Value = TwoStateVector> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter_map("non-degenerate state", |(a, b, c, d)| {
            TwoStateVector::from_parts(a, b, c, d)
                .ok()
                .filter(|s| s.plus_weight() > 1e-3 && s.minus_weight() > 1e-3)
        })
}

fn setup() -> impl Strategy<Value = MeasurementSetup> {
    (state(), 0.0..10.0f64, -3.2..3.2f64, -5.0..5.0f64, 0.2..4.0f64).prop_map(|(i, m, phase, g, sigma)| {
        MeasurementSetup::with_weak_value(i, Complex64::from_polar(m, phase), g, sigma).unwrap()
    })
}

fn noise() -> impl Strategy<Value = NoiseModel> {
    prop_oneof![Just(NoiseModel::noiseless()), (0.0..3.0f64).prop_map(|s| NoiseModel::new(s).unwrap())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn decide_is_symmetric(x in -50.0..50.0f64, sigma in 0.1..5.0f64, c in 0.01..6.0f64, coin in 0.0..1.0f64) {
        let rule = DecisionRule::with_critical_point(c).unwrap();
        prop_assert_eq!(decide(x, sigma, &rule, coin), decide(-x, sigma, &rule, coin));
    }

    #[test]
    fn report_is_consistent(s in setup(), n in noise(), c in 0.05..6.0f64) {
        let rule = DecisionRule::with_critical_point(c).unwrap();
        let r = ErrorReport::evaluate(&s, &rule, n).unwrap();
        for p in [r.p_e1, r.p_e2_ps, r.p_e2_nps, r.beta_ps, r.beta_nps] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
        prop_assert_eq!(r.beta_ps, 1.0 - r.p_e2_ps);
        prop_assert_eq!(r.beta_nps, 1.0 - r.p_e2_nps);
        prop_assert_eq!(r.alpha, r.p_e1);
    }

    #[test]
    fn power_at_null_is_significance_level(s in setup(), n in noise(), c in 0.05..6.0f64) {
        let rule = DecisionRule::with_critical_point(c).unwrap();
        let null = s.with_g(0.0).unwrap();
        let alpha = type1_error(&rule, n, s.sigma());
        for mode in Mode::BOTH {
            prop_assert!((power(&null, &rule, n, mode).unwrap() - alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn amplification_never_hurts_detection(
        i in state(), m in 1.0..10.0f64, phase in -3.2..3.2f64,
        g in 0.01..5.0f64, c in 0.1..5.0f64, n in noise(),
    ) {
        let s = MeasurementSetup::with_weak_value(i, Complex64::from_polar(m, phase), g, 1.0).unwrap();
        let rule = DecisionRule::with_critical_point(c).unwrap();
        let r = ErrorReport::evaluate(&s, &rule, n).unwrap();
        prop_assert!(r.p_e2_ps <= r.p_e2_nps + 1e-12);
        prop_assert!(r.beta_ps >= r.beta_nps - 1e-12);
    }

    #[test]
    fn ratio_is_even_in_coupling(s in setup(), n in noise(), c in 0.1..5.0f64) {
        let rule = DecisionRule::with_critical_point(c).unwrap();
        let flipped = s.with_g(-s.g()).unwrap();
        match (error_ratio_minus_one(&s, &rule, n), error_ratio_minus_one(&flipped, &rule, n)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0)),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "asymmetric outcome {:?}", other),
        }
    }

    #[test]
    fn ratio_derivative_is_never_positive(s in setup(), c in 0.1..5.0f64) {
        let rule = DecisionRule::with_critical_point(c).unwrap();
        if let Ok(d) = ratio_derivative_wrt_awsq(&s, &rule, NoiseModel::noiseless()) {
            prop_assert!(d <= 0.0);
        }
    }

    #[test]
    fn null_mass_dominates_for_nonzero_coupling(c in 0.05..6.0f64, g in 0.01..6.0f64, sign in prop::bool::ANY) {
        let g = if sign { g } else { -g };
        prop_assert!(null_mass_dominates(c, g));
    }

    #[test]
    fn critical_point_round_trip(alpha in 1e-6..0.999f64, n in noise(), sigma in 0.2..4.0f64) {
        let c = critical_point_for_alpha(alpha, n, sigma).unwrap();
        let rule = DecisionRule::with_critical_point(c).unwrap();
        prop_assert!((type1_error(&rule, n, sigma) - alpha).abs() < 1e-12);
    }

    #[test]
    fn cdf_is_monotone_and_bounded(s in setup(), n in noise(), a in -20.0..20.0f64, d in 0.0..5.0f64) {
        for mode in Mode::BOTH {
            let dist = ProbeDistribution::new(&s, n, mode).unwrap();
            let lo = dist.cdf(a);
            let hi = dist.cdf(a + d);
            prop_assert!((0.0..=1.0).contains(&lo));
            prop_assert!(hi >= lo - 1e-15);
        }
    }

    #[test]
    fn densities_are_non_negative(s in setup(), n in noise(), x in -30.0..30.0f64) {
        for mode in Mode::BOTH {
            prop_assert!(probe::density(&s, n, mode, x).unwrap() >= 0.0);
        }
    }

    #[test]
    fn success_probability_is_a_probability(s in setup()) {
        let p = success_probability(&s).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0 + 1e-15);
    }

    #[test]
    fn umpu_certificate_passes(s in setup(), c in 0.2..4.0f64, g1 in 0.05..3.0f64) {
        let rule = DecisionRule::with_critical_point(c).unwrap();
        for mode in Mode::BOTH {
            let cert = umpu_certificate(&s, &rule, g1, mode).unwrap();
            prop_assert!(cert.passed(), "{:?}", cert);
        }
    }
}
