//! The `|x|/sigma` two-sided test for the presence of the interaction.
//!
//! The null hypothesis is `g = 0`. The test rejects it when the readout leaves
//! `(-c sigma, c sigma)`. This module evaluates the test's error
//! probabilities in both measurement modes and the numerical certificates
//! showing the test is UMPU, and UMP when the densities are even.

use std::f64::consts::SQRT_2;

use crate::error::{ensure, Error, Result};
use crate::probe::{postselection_norm, Mode, NoiseModel};
use crate::special::{erf, erfc, erfc_inv};
use crate::two_state::MeasurementSetup;

/// Tolerance for "Re A_w = 0" and "|<+|i>|^2 = |<-|i>|^2" premises.
pub const PREMISE_TOL: f64 = 1e-12;

/// Central-difference step used for derivatives in `g` and `|A_w|^2`.
pub const FD_STEP: f64 = 1e-5;

/// Critical point `c` and the probability `r` of accepting the null on the boundary `|x| = c sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRule {
    c: f64,
    r: f64,
}

impl DecisionRule {
    pub fn new(c: f64, r: f64) -> Result<Self> {
        ensure(c.is_finite() && c > 0.0, || {
            format!("critical point must be positive and finite, got {c}")
        })?;
        ensure((0.0..=1.0).contains(&r), || {
            format!("boundary acceptance probability must lie in [0, 1], got {r}")
        })?;
        Ok(Self { c, r })
    }

    /// Rule with `r = 1`. The boundary has probability zero, so `r` never matters in practice.
    pub fn with_critical_point(c: f64) -> Result<Self> {
        Self::new(c, 1.0)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    AcceptNull,
    RejectNull,
}

/// Applies the rule to one readout. `coin` in `[0, 1)` resolves the boundary case.
pub fn decide(x: f64, sigma: f64, rule: &DecisionRule, coin: f64) -> Decision {
    let t = x.abs() / sigma;
    if t > rule.c {
        Decision::RejectNull
    } else if t < rule.c || coin < rule.r {
        Decision::AcceptNull
    } else {
        Decision::RejectNull
    }
}

/// `P(reject | g = 0) = 1 - erf[c sigma / sqrt(2 (sigma^2 + s^2))]`, the same in both modes.
pub fn type1_error(rule: &DecisionRule, noise: NoiseModel, sigma: f64) -> f64 {
    erfc(rule.c * sigma / (SQRT_2 * noise.effective_sd(sigma)))
}

/// The alternative noisy type-1 expression `1 - erf[c sigma / (2 sqrt(sigma^2 + s^2))]`.
///
/// It disagrees with [`type1_error`] even at `s = 0` and is kept only so
/// that Monte Carlo runs can show it is not the rejection rate actually observed.
pub fn type1_error_half_argument(rule: &DecisionRule, noise: NoiseModel, sigma: f64) -> f64 {
    erfc(rule.c * sigma / (2.0 * noise.effective_sd(sigma)))
}

/// The critical point whose type-1 error is `alpha`.
pub fn critical_point_for_alpha(alpha: f64, noise: NoiseModel, sigma: f64) -> Result<f64> {
    ensure(alpha > 0.0 && alpha < 1.0, || {
        format!("significance level must lie in (0, 1), got {alpha}")
    })?;
    ensure(sigma.is_finite() && sigma > 0.0, || {
        format!("sigma must be positive, got {sigma}")
    })?;
    Ok(SQRT_2 * noise.effective_sd(sigma) / sigma * erfc_inv(alpha))
}

/// Erf pieces shared by the type-2 expressions.
struct AcceptanceErfs {
    /// `erf[(c sigma - g)/sqrt(2 sd^2)] + erf[(c sigma + g)/sqrt(2 sd^2)]`
    shifted_sum: f64,
    /// `erf[c sigma / sqrt(2 sd^2)]`
    centred: f64,
}

impl AcceptanceErfs {
    fn new(c: f64, g: f64, sigma: f64, noise: NoiseModel) -> Self {
        let scale = SQRT_2 * noise.effective_sd(sigma);
        let half_width = c * sigma;
        Self {
            shifted_sum: erf((half_width - g) / scale) + erf((half_width + g) / scale),
            centred: erf(half_width / scale),
        }
    }

    /// `2 erf[c'] - (erf[c' - g'] + erf[c' + g'])`, grouped to limit cancellation for small `g`.
    fn excess(&self, c: f64, g: f64, sigma: f64, noise: NoiseModel) -> f64 {
        let scale = SQRT_2 * noise.effective_sd(sigma);
        let half_width = c * sigma;
        (self.centred - erf((half_width - g) / scale)) - (erf((half_width + g) / scale) - self.centred)
    }
}

/// `P(accept | g)`: probability of missing an interaction of strength `setup.g()`.
pub fn type2_error(
    setup: &MeasurementSetup,
    rule: &DecisionRule,
    noise: NoiseModel,
    mode: Mode,
) -> Result<f64> {
    let erfs = AcceptanceErfs::new(rule.c, setup.g(), setup.sigma(), noise);
    let p = match mode {
        Mode::NoPostselection => 0.5 * erfs.shifted_sum,
        Mode::Postselected => {
            let a2 = setup.weak_value().ok_or(Error::ModeMismatch)?.norm_sqr();
            let overlap = setup.shift_overlap();
            ((1.0 + a2) * erfs.shifted_sum + 2.0 * (1.0 - a2) * overlap * erfs.centred)
                / (2.0 * postselection_norm(a2, overlap))
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Detection power `1 - P(type-2)`.
pub fn power(
    setup: &MeasurementSetup,
    rule: &DecisionRule,
    noise: NoiseModel,
    mode: Mode,
) -> Result<f64> {
    Ok(1.0 - type2_error(setup, rule, noise, mode)?)
}

/// Error probabilities and powers of both modes at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// Significance level implied by the critical point.
    pub alpha: f64,
    pub p_e1: f64,
    pub p_e2_ps: f64,
    pub p_e2_nps: f64,
    pub beta_ps: f64,
    pub beta_nps: f64,
    /// `P(E2, ps) / P(E2, nps)`
    pub ratio_e2: f64,
    /// `beta_ps / beta_nps`
    pub ratio_beta: f64,
}

impl ErrorReport {
    pub fn evaluate(setup: &MeasurementSetup, rule: &DecisionRule, noise: NoiseModel) -> Result<Self> {
        let p_e1 = type1_error(rule, noise, setup.sigma());
        let p_e2_ps = type2_error(setup, rule, noise, Mode::Postselected)?;
        let p_e2_nps = type2_error(setup, rule, noise, Mode::NoPostselection)?;
        let beta_ps = 1.0 - p_e2_ps;
        let beta_nps = 1.0 - p_e2_nps;
        Ok(Self {
            alpha: p_e1,
            p_e1,
            p_e2_ps,
            p_e2_nps,
            beta_ps,
            beta_nps,
            ratio_e2: p_e2_ps / p_e2_nps,
            ratio_beta: beta_ps / beta_nps,
        })
    }
}

/// `P(E2, ps)/P(E2, nps) - 1` in its rearranged form
/// `(1 - |A_w|^2)(k - 1) e^{-g^2/2 sigma^2} / [1 + |A_w|^2 + (1 - |A_w|^2) e^{-g^2/2 sigma^2}]`
/// with `k = 2 erf[c'] / (erf[c' - g'] + erf[c' + g'])`.
pub fn error_ratio_minus_one(setup: &MeasurementSetup, rule: &DecisionRule, noise: NoiseModel) -> Result<f64> {
    let a2 = setup.weak_value().ok_or(Error::ModeMismatch)?.norm_sqr();
    let k_minus_one = ratio_excess(setup, rule, noise)?;
    let overlap = setup.shift_overlap();
    Ok((1.0 - a2) * k_minus_one * overlap / postselection_norm(a2, overlap))
}

/// `d[P(E2, ps)/P(E2, nps)] / d|A_w|^2 = -2 (k - 1) e^{-g^2/2 sigma^2} / [..]^2`, never positive.
pub fn ratio_derivative_wrt_awsq(setup: &MeasurementSetup, rule: &DecisionRule, noise: NoiseModel) -> Result<f64> {
    let a2 = setup.weak_value().ok_or(Error::ModeMismatch)?.norm_sqr();
    let k_minus_one = ratio_excess(setup, rule, noise)?;
    let overlap = setup.shift_overlap();
    let norm = postselection_norm(a2, overlap);
    Ok(-2.0 * k_minus_one * overlap / (norm * norm))
}

fn ratio_excess(setup: &MeasurementSetup, rule: &DecisionRule, noise: NoiseModel) -> Result<f64> {
    let erfs = AcceptanceErfs::new(rule.c, setup.g(), setup.sigma(), noise);
    if 0.5 * erfs.shifted_sum < 1e-300 {
        return Err(Error::DivisionDegenerate {
            denominator: 0.5 * erfs.shifted_sum,
        });
    }
    Ok(erfs.excess(rule.c, setup.g(), setup.sigma(), noise) / erfs.shifted_sum)
}

/// `2 erf[c/sqrt 2] / (erf[(c - g/sigma)/sqrt 2] + erf[(c + g/sigma)/sqrt 2])`.
pub fn null_mass_ratio(c: f64, g_over_sigma: f64) -> f64 {
    let erfs = AcceptanceErfs::new(c, g_over_sigma, 1.0, NoiseModel::noiseless());
    2.0 * erfs.centred / erfs.shifted_sum
}

/// Whether the acceptance window holds strictly more null mass than the
/// average of the two shifted Gaussians, i.e. `null_mass_ratio > 1`.
///
/// This is the inequality behind `P(E2, ps) <= P(E2, nps)` for `|A_w| >= 1`.
/// It is evaluated as a difference of erf increments to stay exact at small `g`.
pub fn null_mass_dominates(c: f64, g_over_sigma: f64) -> bool {
    let erfs = AcceptanceErfs::new(c, g_over_sigma, 1.0, NoiseModel::noiseless());
    erfs.excess(c, g_over_sigma, 1.0, NoiseModel::noiseless()) > 0.0
}

/// Likelihood ratio `f(x|g)/f(x|0)` of the noiseless probe density, with `g = setup.g()`.
pub fn likelihood_ratio(setup: &MeasurementSetup, mode: Mode, x: f64) -> Result<f64> {
    let g = setup.g();
    let var = setup.sigma() * setup.sigma();
    let drift = x * g / var;
    let decay = -g * g / (2.0 * var);
    match mode {
        Mode::NoPostselection => {
            let i = setup.i_state();
            Ok(i.plus_weight() * (decay + drift).exp() + i.minus_weight() * (decay - drift).exp())
        }
        Mode::Postselected => {
            let aw = setup.weak_value().ok_or(Error::ModeMismatch)?;
            let a2 = aw.norm_sqr();
            let overlap = decay.exp();
            let up = (1.0 + a2 + 2.0 * aw.re) * (decay + drift).exp();
            let down = (1.0 + a2 - 2.0 * aw.re) * (decay - drift).exp();
            let centre = 2.0 * (1.0 - a2) * overlap;
            Ok((up + down + centre) / (2.0 * postselection_norm(a2, overlap)))
        }
    }
}

/// Second derivative in `x` of [`likelihood_ratio`].
fn likelihood_ratio_curvature(setup: &MeasurementSetup, mode: Mode, x: f64) -> Result<f64> {
    let g = setup.g();
    let var = setup.sigma() * setup.sigma();
    let k = g / var;
    let drift = x * k;
    let decay = -g * g / (2.0 * var);
    match mode {
        Mode::NoPostselection => {
            let i = setup.i_state();
            Ok(k * k * (i.plus_weight() * (decay + drift).exp() + i.minus_weight() * (decay - drift).exp()))
        }
        Mode::Postselected => {
            let aw = setup.weak_value().ok_or(Error::ModeMismatch)?;
            let a2 = aw.norm_sqr();
            let up = (1.0 + a2 + 2.0 * aw.re) * (decay + drift).exp();
            let down = (1.0 + a2 - 2.0 * aw.re) * (decay - drift).exp();
            Ok(k * k * (up + down) / (2.0 * postselection_norm(a2, decay.exp())))
        }
    }
}

/// Whether the density of `mode` is even in `x` for this setup.
fn premise_gap(setup: &MeasurementSetup, mode: Mode) -> Result<f64> {
    Ok(match mode {
        Mode::Postselected => setup.weak_value().ok_or(Error::ModeMismatch)?.re.abs(),
        Mode::NoPostselection => (setup.i_state().plus_weight() - setup.i_state().minus_weight()).abs(),
    })
}

/// Evidence that the `|x|/sigma` rule is the UMPU test against a fixed alternative `g1`.
///
/// With `F(x) = f(x|g1) - c1 f(x|0) - c2 d_g f(x|g)|_{g=0}`, the ratio
/// `F(x)/f(x|0) = G(x) - c1 - c2 * slope * x` where `G` is the likelihood
/// ratio. `c1`, `c2` are chosen so that the roots are `x = +-c sigma`; a
/// convex `G` then makes `F > 0` exactly on the rejection region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UmpuCertificate {
    pub mode: Mode,
    pub c1: f64,
    /// Zero in the degenerate branch, where the linear term is absent.
    pub c2: f64,
    /// Coefficient of `x` multiplying `c2`: `Re A_w / sigma^2` or `(|<+|i>|^2 - |<-|i>|^2) / sigma^2`.
    pub slope: f64,
    pub residual_at_plus: f64,
    pub residual_at_minus: f64,
    pub convexity_ok: bool,
    /// Set when `Re A_w = 0` (ps) or `|<+|i>|^2 = |<-|i>|^2` (nps).
    pub degenerate_branch: bool,
    /// Central difference of the power in `g` at `g = 0`.
    pub power_slope_at_null: f64,
}

impl UmpuCertificate {
    pub const RESIDUAL_TOL: f64 = 1e-10;
    pub const SLOPE_TOL: f64 = 1e-8;

    pub fn passed(&self) -> bool {
        self.residual_at_plus < Self::RESIDUAL_TOL
            && self.residual_at_minus < Self::RESIDUAL_TOL
            && self.convexity_ok
            && self.power_slope_at_null.abs() < Self::SLOPE_TOL
    }

    /// `F(x)/f(x|0)` for the constants of this certificate.
    pub fn boundary_function(&self, setup_at_g1: &MeasurementSetup, x: f64) -> Result<f64> {
        Ok(likelihood_ratio(setup_at_g1, self.mode, x)? - self.c1 - self.c2 * self.slope * x)
    }
}

/// Builds the UMPU certificate for the alternative `g1` (the setup's own `g` is ignored).
pub fn umpu_certificate(
    setup: &MeasurementSetup,
    rule: &DecisionRule,
    g1: f64,
    mode: Mode,
) -> Result<UmpuCertificate> {
    ensure(g1 != 0.0 && g1.is_finite(), || {
        "the alternative coupling must be nonzero; at g1 = 0 both hypotheses coincide".to_string()
    })?;
    let alt = setup.with_g(g1)?;
    let sigma = setup.sigma();
    let c = rule.c;
    let overlap = alt.shift_overlap();
    let cg = c * g1 / sigma;
    let degenerate_branch = premise_gap(setup, mode)? <= PREMISE_TOL;

    let (c1, c2, slope) = match mode {
        Mode::Postselected => {
            let aw = setup.weak_value().ok_or(Error::ModeMismatch)?;
            let a2 = aw.norm_sqr();
            let norm = postselection_norm(a2, overlap);
            let c1 = overlap * ((1.0 + a2) * cg.cosh() + (1.0 - a2)) / norm;
            let c2 = 2.0 * sigma * overlap * cg.sinh() / (c * norm);
            (c1, c2, aw.re / (sigma * sigma))
        }
        Mode::NoPostselection => {
            let i = setup.i_state();
            let c1 = overlap * cg.cosh();
            let c2 = sigma * overlap * cg.sinh() / c;
            (c1, c2, (i.plus_weight() - i.minus_weight()) / (sigma * sigma))
        }
    };
    let c2 = if degenerate_branch { 0.0 } else { c2 };

    let boundary = c * sigma;
    let residual = |x: f64| -> Result<f64> {
        Ok((likelihood_ratio(&alt, mode, x)? - c1 - c2 * slope * x).abs())
    };
    let residual_at_plus = residual(boundary)?;
    let residual_at_minus = residual(-boundary)?;

    let reach = (c + 5.0) * sigma;
    let mut convexity_ok = true;
    for k in 0..=1000 {
        let x = -reach + 2.0 * reach * k as f64 / 1000.0;
        if likelihood_ratio_curvature(&alt, mode, x)? <= 0.0 {
            convexity_ok = false;
            break;
        }
    }

    let noise = NoiseModel::noiseless();
    let up = power(&setup.with_g(FD_STEP)?, rule, noise, mode)?;
    let down = power(&setup.with_g(-FD_STEP)?, rule, noise, mode)?;
    let power_slope_at_null = (up - down) / (2.0 * FD_STEP);

    Ok(UmpuCertificate {
        mode,
        c1,
        c2,
        slope,
        residual_at_plus,
        residual_at_minus,
        convexity_ok,
        degenerate_branch,
        power_slope_at_null,
    })
}

/// Whether `f(x|g)/f(x|0)` strictly increases along the statistic `T = |x|/sigma`
/// over `t_grid` (ascending, non-negative), with `g = setup.g()`.
///
/// Only meaningful when the density is even: `Re A_w = 0` with postselection,
/// `|<+|i>|^2 = |<-|i>|^2` without. Otherwise the ratio is not a function of
/// `T` alone and [`Error::PremiseViolated`] is returned.
pub fn ump_monotonicity_certificate(setup: &MeasurementSetup, mode: Mode, t_grid: &[f64]) -> Result<bool> {
    ensure(setup.g() != 0.0, || "coupling must be nonzero".to_string())?;
    ensure(t_grid.len() >= 2, || "statistic grid needs at least two points".to_string())?;
    ensure(
        t_grid.windows(2).all(|w| w[0] < w[1]) && t_grid[0] >= 0.0,
        || "statistic grid must be non-negative and strictly ascending".to_string(),
    )?;
    let gap = premise_gap(setup, mode)?;
    if gap > PREMISE_TOL {
        return Err(Error::PremiseViolated(match mode {
            Mode::Postselected => format!("Re A_w = {gap:e} is not zero"),
            Mode::NoPostselection => format!("|<+|i>|^2 - |<-|i>|^2 = {gap:e} is not zero"),
        }));
    }
    let sigma = setup.sigma();
    let mut previous = likelihood_ratio(setup, mode, t_grid[0] * sigma)?;
    for &t in &t_grid[1..] {
        let current = likelihood_ratio(setup, mode, t * sigma)?;
        if current - previous <= 1e-12 * previous.abs() {
            return Ok(false);
        }
        previous = current;
    }
    Ok(true)
}
