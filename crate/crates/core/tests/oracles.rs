//! Closed forms checked against independent numerical evaluations.

mod common;

use common::*;
use num_complex::Complex64;
use rand::Rng;
use wva_core::hypothesis::*;
use wva_core::loss::*;
use wva_core::probe::{self, Mode, NoiseModel, ProbeDistribution};
use wva_core::quadrature::Quadrature;
use wva_core::special::erf;
use wva_core::{success_probability, MeasurementSetup, TwoStateVector};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

fn quad() -> Quadrature {
    Quadrature::default()
}

fn breaks(setup: &MeasurementSetup) -> [f64; 3] {
    [-setup.g(), 0.0, setup.g()]
}

#[test]
fn type2_matches_quadrature_of_amplitude_density() {
    // mpmath, 40 digits: same integral from the amplitude form.
    const FROZEN: f64 = 0.560_136_583_471_707;
    let setup = double_peak(1.5);
    let rule = DecisionRule::with_critical_point(1.96).unwrap();
    let q = quad();
    let b = 1.5 + 14.0;
    let total = q.integrate_with_breaks(|x| amplitude_density(&setup, x), -b, b, &breaks(&setup)).unwrap().value;
    let inside = q
        .integrate_with_breaks(|x| amplitude_density(&setup, x), -1.96, 1.96, &breaks(&setup))
        .unwrap()
        .value;
    let closed = type2_error(&setup, &rule, NoiseModel::noiseless(), Mode::Postselected).unwrap();
    assert!((inside / total - FROZEN).abs() < 1e-12);
    assert!((closed - FROZEN).abs() < 1e-12, "closed {closed}");
    let nps = type2_error(&setup, &rule, NoiseModel::noiseless(), Mode::NoPostselection).unwrap();
    assert!((nps - 0.676_971_802_055_688_8).abs() < 1e-13);
}

#[test]
fn type2_closed_form_equals_cdf_difference() {
    let mut r = rng(11);
    for _ in 0..500 {
        let setup = random_setup(&mut r);
        let noise = random_noise(&mut r, setup.sigma());
        let rule = DecisionRule::with_critical_point(r.random_range(0.05..5.0)).unwrap();
        for mode in Mode::BOTH {
            let closed = type2_error(&setup, &rule, noise, mode).unwrap();
            let half = rule.c() * setup.sigma();
            let via_cdf = probe::cdf(&setup, noise, mode, half).unwrap() - probe::cdf(&setup, noise, mode, -half).unwrap();
            assert!((closed - via_cdf).abs() < 1e-10, "{closed} vs {via_cdf}");
        }
    }
}

#[test]
fn success_probability_matches_norm_of_postselected_wavefunction() {
    let mut r = rng(12);
    let q = quad();
    for _ in 0..200 {
        let setup = random_setup(&mut r);
        let b = setup.g().abs() + 14.0 * setup.sigma();
        let norm = q.integrate_with_breaks(|x| amplitude_density(&setup, x), -b, b, &breaks(&setup)).unwrap().value;
        let closed = success_probability(&setup).unwrap();
        assert!((closed - norm).abs() < 1e-10 * norm.max(1e-3), "{closed} vs {norm}");
    }
}

#[test]
fn postselected_density_matches_amplitude_form() {
    let mut r = rng(13);
    for _ in 0..200 {
        let setup = random_setup(&mut r);
        let p = success_probability(&setup).unwrap();
        for k in 0..50 {
            let x = -8.0 + 16.0 * k as f64 / 49.0;
            let closed = probe::density(&setup, NoiseModel::noiseless(), Mode::Postselected, x).unwrap();
            let direct = amplitude_density(&setup, x) / p;
            assert!((closed - direct).abs() < 1e-11 * (1.0 + direct), "x={x}: {closed} vs {direct}");
        }
    }
}

#[test]
fn type1_matches_quadrature_of_null_density() {
    let mut r = rng(14);
    let q = quad();
    for _ in 0..100 {
        let sigma = r.random_range(0.3..3.0);
        let noise = random_noise(&mut r, sigma);
        let rule = DecisionRule::with_critical_point(r.random_range(0.05..5.0)).unwrap();
        let null = MeasurementSetup::new(TwoStateVector::balanced(), None, 0.0, sigma).unwrap();
        let sd = noise.effective_sd(sigma);
        let tail = 2.0 * q
            .integrate(|x| probe::density(&null, noise, Mode::NoPostselection, x).unwrap(), rule.c() * sigma, rule.c() * sigma + 40.0 * sd)
            .unwrap()
            .value;
        assert!((type1_error(&rule, noise, sigma) - tail).abs() < 1e-10);
    }
}

#[test]
fn critical_point_for_five_percent() {
    // sqrt(2) erfinv(0.95), mpmath.
    let c = critical_point_for_alpha(0.05, NoiseModel::noiseless(), 1.0).unwrap();
    assert!((c - 1.959_963_984_540_054_2).abs() < 1e-13);
}

#[test]
fn ratio_derivative_at_reference_point() {
    // mpmath central derivative of the exact ratio in |A_w|^2 at sigma=1, g=1, c=2, |A_w|^2=4.
    const FROZEN: f64 = -0.016_347_994_342_222_385;
    let setup = MeasurementSetup::with_weak_value(TwoStateVector::balanced(), Complex64::new(2.0, 0.0), 1.0, 1.0).unwrap();
    let rule = DecisionRule::with_critical_point(2.0).unwrap();
    let d = ratio_derivative_wrt_awsq(&setup, &rule, NoiseModel::noiseless()).unwrap();
    assert!((d - FROZEN).abs() < 1e-12 * FROZEN.abs().max(1.0), "{d}");
    let r = error_ratio_minus_one(&setup, &rule, NoiseModel::noiseless()).unwrap();
    assert!((r + 0.077_989_938_496_518_45).abs() < 1e-13);
}

fn ratio_at(setup: &MeasurementSetup, rule: &DecisionRule, aw_sq: f64) -> f64 {
    let phase = setup.weak_value().unwrap().arg();
    let s = MeasurementSetup::with_weak_value(*setup.i_state(), Complex64::from_polar(aw_sq.sqrt(), phase), setup.g(), setup.sigma()).unwrap();
    // The rearranged ratio - 1 avoids the cancellation of the plain quotient near 1;
    // `error_ratio_matches_direct_quotient` ties the two together.
    error_ratio_minus_one(&s, rule, NoiseModel::noiseless()).unwrap()
}

#[test]
fn ratio_derivative_matches_finite_differences() {
    let mut r = rng(15);
    let h = 1e-5;
    let mut checked = 0;
    while checked < 1000 {
        let aw_sq: f64 = r.random_range(0.05..25.0);
        let g = r.random_range(0.2..3.0);
        let c = r.random_range(0.3..3.5);
        let setup = MeasurementSetup::with_weak_value(
            TwoStateVector::balanced(),
            Complex64::from_polar(aw_sq.sqrt(), r.random_range(-3.0..3.0)),
            g,
            1.0,
        )
        .unwrap();
        let rule = DecisionRule::with_critical_point(c).unwrap();
        let closed = ratio_derivative_wrt_awsq(&setup, &rule, NoiseModel::noiseless()).unwrap();
        // Below ~1e-6 the central difference is limited by roundoff, not the formula.
        if closed.abs() < 1e-6 {
            continue;
        }
        let fd = (ratio_at(&setup, &rule, aw_sq + h) - ratio_at(&setup, &rule, aw_sq - h)) / (2.0 * h);
        assert!((closed - fd).abs() <= 1e-6 * closed.abs(), "closed {closed} fd {fd}");
        assert!(closed <= 0.0);
        checked += 1;
    }
}

#[test]
fn error_ratio_matches_direct_quotient() {
    let mut r = rng(16);
    for _ in 0..1000 {
        let setup = random_setup(&mut r);
        let noise = random_noise(&mut r, setup.sigma());
        let rule = DecisionRule::with_critical_point(r.random_range(0.1..5.0)).unwrap();
        let nps = type2_error(&setup, &rule, noise, Mode::NoPostselection).unwrap();
        if nps < 1e-300 {
            assert!(matches!(
                error_ratio_minus_one(&setup, &rule, noise),
                Err(wva_core::Error::DivisionDegenerate { .. })
            ));
            continue;
        }
        let direct = type2_error(&setup, &rule, noise, Mode::Postselected).unwrap() / nps - 1.0;
        let arranged = error_ratio_minus_one(&setup, &rule, noise).unwrap();
        assert!((direct - arranged).abs() < 1e-10, "{direct} vs {arranged}");
    }
}

#[test]
fn likelihood_ratio_is_density_quotient() {
    let mut r = rng(17);
    for _ in 0..200 {
        let setup = random_setup(&mut r);
        let null = setup.with_g(0.0).unwrap();
        for mode in Mode::BOTH {
            let alt = ProbeDistribution::new(&setup, NoiseModel::noiseless(), mode).unwrap();
            let base = ProbeDistribution::new(&null, NoiseModel::noiseless(), mode).unwrap();
            for k in 0..21 {
                let x = setup.sigma() * (-3.0 + 0.3 * k as f64);
                let quotient = alt.density(x) / base.density(x);
                let lr = likelihood_ratio(&setup, mode, x).unwrap();
                assert!((lr - quotient).abs() < 1e-11 * quotient.max(1.0));
            }
        }
    }
}

/// Counts sign changes of `F/f0` on a fine grid, skipping exact zeros.
fn sign_changes(cert: &UmpuCertificate, alt: &MeasurementSetup, reach: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let n = 20_000;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=n {
        let x = -reach + 2.0 * reach * k as f64 / n as f64;
        let v = cert.boundary_function(alt, x).unwrap();
        if v == 0.0 {
            continue;
        }
        if let Some((px, pv)) = prev {
            if pv.signum() != v.signum() {
                // Bisection to locate the root.
                let (mut lo, mut hi) = (px, x);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    let m = cert.boundary_function(alt, mid).unwrap();
                    if m.signum() == pv.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        prev = Some((x, v));
    }
    roots
}

#[test]
fn umpu_reference_cases_have_roots_only_at_boundary() {
    let rule = DecisionRule::with_critical_point(2.0).unwrap();
    let ps = MeasurementSetup::with_weak_value(TwoStateVector::balanced(), Complex64::new(0.5, 0.0), 1.0, 1.0).unwrap();
    let cert = umpu_certificate(&ps, &rule, 1.0, Mode::Postselected).unwrap();
    assert!(cert.passed(), "{cert:?}");
    let roots = sign_changes(&cert, &ps.with_g(1.0).unwrap(), 8.0);
    assert_eq!(roots.len(), 2);
    assert!((roots[0] + 2.0).abs() < 1e-8 && (roots[1] - 2.0).abs() < 1e-8, "{roots:?}");

    let i = TwoStateVector::from_parts(0.7_f64.sqrt(), 0.0, 0.3_f64.sqrt(), 0.0).unwrap();
    let nps = MeasurementSetup::new(i, None, 1.0, 1.0).unwrap();
    let cert = umpu_certificate(&nps, &rule, 1.0, Mode::NoPostselection).unwrap();
    assert!(cert.passed(), "{cert:?}");
    let roots = sign_changes(&cert, &nps, 8.0);
    assert_eq!(roots.len(), 2);
    assert!((roots[0] + 2.0).abs() < 1e-8 && (roots[1] - 2.0).abs() < 1e-8, "{roots:?}");
}

#[test]
fn umpu_constants_reproduce_even_and_odd_parts() {
    // c1 is the even part of G at the boundary; c2 * slope * c sigma is the odd part.
    let mut r = rng(18);
    for _ in 0..200 {
        let setup = random_setup(&mut r);
        let rule = DecisionRule::with_critical_point(r.random_range(0.2..4.0)).unwrap();
        let g1 = r.random_range(0.1..3.0);
        let alt = setup.with_g(g1).unwrap();
        for mode in Mode::BOTH {
            let cert = umpu_certificate(&setup, &rule, g1, mode).unwrap();
            let b = rule.c() * setup.sigma();
            let up = likelihood_ratio(&alt, mode, b).unwrap();
            let down = likelihood_ratio(&alt, mode, -b).unwrap();
            let even = 0.5 * (up + down);
            assert!((cert.c1 - even).abs() < 1e-11 * even.max(1.0));
            if !cert.degenerate_branch {
                let odd = 0.5 * (up - down);
                assert!((cert.c2 * cert.slope * b - odd).abs() < 1e-10 * even.max(1.0));
            }
        }
    }
}

#[test]
fn power_derivative_at_null_matches_zero_analytically() {
    // The power is even in g for both modes, so its derivative at g = 0 vanishes.
    let mut r = rng(19);
    for _ in 0..100 {
        let setup = random_setup(&mut r);
        let rule = DecisionRule::with_critical_point(r.random_range(0.2..4.0)).unwrap();
        for mode in Mode::BOTH {
            let a = power(&setup, &rule, NoiseModel::noiseless(), mode).unwrap();
            let b = power(&setup.with_g(-setup.g()).unwrap(), &rule, NoiseModel::noiseless(), mode).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }
}

// Loss-aware test.

fn joint_acceptance(setup: &MeasurementSetup, rule: &LossDecisionRule) -> f64 {
    // Integrate |<f|U|i>|^2 and |<fbar|U|i>|^2 over the respective acceptance windows.
    let f = *setup.f_state().unwrap();
    let fbar = f.orthogonal_complement();
    let i = *setup.i_state();
    let q = quad();
    let s = setup.sigma();
    let g = setup.g();
    let psi = |u: f64| (2.0 * std::f64::consts::PI * s * s).powf(-0.25) * (-u * u / (4.0 * s * s)).exp();
    let branch = |post: TwoStateVector, c: f64| {
        let ap = post.plus_amp().conj() * i.plus_amp();
        let am = post.minus_amp().conj() * i.minus_amp();
        let h = if c.is_infinite() { g.abs() + 14.0 * s } else { c * s };
        q.integrate_with_breaks(|x| (ap * psi(x - g) + am * psi(x + g)).norm_sqr(), -h, h, &[-g, 0.0, g])
            .unwrap()
            .value
    };
    branch(f, rule.c_f()) + branch(fbar, rule.c_fbar())
}

#[test]
fn loss_type2_matches_joint_model_quadrature() {
    let mut r = rng(20);
    for k in 0..300 {
        let setup = random_setup(&mut r);
        let f = setup.f_state().unwrap();
        let i = setup.i_state();
        let p1 = f.inner(i).norm_sqr();
        let p2 = f.observable_element(i).norm_sqr();
        if !(p1 > 1e-6 && p1 < 1.0 - 1e-6 && p2 > 1e-6 && p2 < 1.0 - 1e-6) {
            continue;
        }
        let c_f = r.random_range(0.1..4.0);
        let c_fbar = if k % 3 == 0 { f64::INFINITY } else { r.random_range(0.1..4.0) };
        let pt = LossTestPoint::new(p1, p2, c_f, c_fbar, 0.0, 0.05).unwrap();
        let closed = loss_type2_error(&pt, setup.g(), setup.sigma());
        let numeric = joint_acceptance(&setup, &pt.rule());
        assert!((closed - numeric).abs() < 1e-9, "{closed} vs {numeric}");
    }
}

#[test]
fn loss_type1_with_discarded_failures() {
    let pt = LossTestPoint::new(0.5, 0.2, 1.0, f64::INFINITY, 0.0, 0.05).unwrap();
    let expected = 0.5 * (1.0 - erf(1.0 / SQRT_2));
    assert!((loss_type1_error(&pt, 1.0) - expected).abs() < 1e-16);
}

#[test]
fn stationarity_partials_match_finite_differences() {
    let mut r = rng(21);
    let h = 1e-6;
    for _ in 0..1000 {
        let g = r.random_range(-3.0..3.0);
        let sigma = r.random_range(0.5..2.0);
        let pt = LossTestPoint::new(
            r.random_range(0.05..0.95),
            r.random_range(0.05..0.95),
            r.random_range(0.1..4.0),
            r.random_range(0.1..4.0),
            r.random_range(-2.0..4.0),
            r.random_range(0.01..0.5),
        )
        .unwrap();
        let res = stationarity_residuals(&pt, g, sigma).unwrap().as_array();
        let bump = |k: usize, d: f64| {
            let mut p = pt;
            match k {
                0 => p.lambda += d,
                1 => p.p1 += d,
                2 => p.p2 += d,
                3 => p.c_f += d,
                _ => p.c_fbar += d,
            }
            lagrangian(&p, g, sigma)
        };
        for (k, closed) in res.iter().enumerate() {
            let fd = (bump(k, h) - bump(k, -h)) / (2.0 * h);
            // Relative agreement with an absolute floor for partials that are nearly zero.
            assert!((closed - fd).abs() <= 1e-6 * closed.abs().max(1e-3), "partial {k}: {closed} vs {fd}");
        }
    }
}

#[test]
fn equal_critical_points_make_errors_independent_of_states() {
    let mut r = rng(22);
    for _ in 0..200 {
        let c = r.random_range(0.1..4.0);
        let g = r.random_range(-3.0..3.0);
        let a = LossTestPoint::new(r.random_range(0.01..0.99), r.random_range(0.01..0.99), c, c, 0.0, 0.05).unwrap();
        let b = LossTestPoint::new(r.random_range(0.01..0.99), r.random_range(0.01..0.99), c, c, 0.0, 0.05).unwrap();
        assert!((loss_type1_error(&a, 1.0) - loss_type1_error(&b, 1.0)).abs() < 1e-15);
        assert!((loss_type2_error(&a, g, 1.0) - loss_type2_error(&b, g, 1.0)).abs() < 1e-15);
    }
}

#[test]
fn eigenstate_postselection_gives_equal_probabilities() {
    // f an eigenstate of A: |<f|i>|^2 = |<f|A|i>|^2 for every i.
    let mut r = rng(23);
    for _ in 0..200 {
        let i = random_state(&mut r);
        for f in [TwoStateVector::plus_state(), TwoStateVector::minus_state()] {
            let f = f.with_global_phase(r.random_range(0.0..6.0));
            let p1 = f.inner(&i).norm_sqr();
            let p2 = f.observable_element(&i).norm_sqr();
            assert!((p1 - p2).abs() < 1e-12);
        }
    }
}

#[test]
fn solver_reference_point() {
    let sol = solve_stationary(1.0, 1.0, 0.05).unwrap();
    let pt = sol.point;
    assert!(sol.max_residual() < 1e-8);
    assert!((pt.c_f - 1.959_963_984_540_054_2).abs() < 1e-9);
    assert!((pt.c_fbar - pt.c_f).abs() < 1e-9);
    assert!((pt.p1 - pt.p2).abs() < 1e-8);
    let lambda = (-0.5_f64).exp() * (pt.c_f * 1.0).cosh();
    assert!((pt.lambda - lambda).abs() < 1e-8);
    assert!(sol.lambda_branch.rejected && sol.lambda_branch.implied_alpha == 1.0);
}

#[test]
fn solver_flags_degenerate_edge() {
    let sol = solve_stationary(1.0, 1.0, 1.0 - 1e-10).unwrap();
    assert!(sol.degenerate);
    assert!(sol.point.c_f < 1e-6);
}
