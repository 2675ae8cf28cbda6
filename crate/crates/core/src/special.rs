//! Error function and Gaussian helpers.
//!
//! `erf`/`erfc` delegate to the `libm` port of the FreeBSD msun routines,
//! which are accurate to about one ulp over the whole real line.

use std::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};

/// The error function `(2/sqrt(pi)) * int_0^t exp(-u^2) du`.
#[inline]
pub fn erf(t: f64) -> f64 {
    libm::erf(t)
}

/// Complementary error function `1 - erf(t)`, accurate in the upper tail.
#[inline]
pub fn erfc(t: f64) -> f64 {
    libm::erfc(t)
}

/// Inverse of `erfc` on `(0, 2)`.
///
/// Bracketed Newton iteration; the result satisfies `erfc(u) = y` to a few ulps.
pub fn erfc_inv(y: f64) -> f64 {
    if y <= 0.0 {
        return f64::INFINITY;
    }
    if y >= 2.0 {
        return f64::NEG_INFINITY;
    }
    if y == 1.0 {
        return 0.0;
    }
    if y > 1.0 {
        return -erfc_inv(2.0 - y);
    }
    // y in (0, 1): root is positive; erfc(27) underflows, so 27 brackets every y > 0.
    let (mut lo, mut hi) = (0.0_f64, 27.3_f64);
    let mut u = if y > 0.1 {
        (1.0 - y) * 0.886_226_925_452_758
    } else {
        (-y.ln()).sqrt()
    };
    for _ in 0..200 {
        let f = erfc(u) - y;
        if f > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let slope = -FRAC_2_SQRT_PI * (-u * u).exp();
        let mut next = u - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-16 * u.abs().max(1e-300) || hi - lo <= f64::EPSILON * hi {
            return next;
        }
        u = next;
    }
    u
}

/// Normal density with mean `mean` and standard deviation `sd`.
#[inline]
pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// Normal CDF, evaluated through `erfc` so both tails keep relative accuracy.
#[inline]
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (sd * SQRT_2))
}

/// Mass of `N(mean, sd^2)` on `(-half_width, half_width)`.
#[inline]
pub fn normal_interval_mass(half_width: f64, mean: f64, sd: f64) -> f64 {
    if half_width.is_infinite() {
        return 1.0;
    }
    0.5 * (erf((half_width - mean) / (sd * SQRT_2)) + erf((half_width + mean) / (sd * SQRT_2)))
}
