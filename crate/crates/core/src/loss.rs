//! Testing with the postselection outcome as a second statistic.
//!
//! Every trial yields either success (`f`) or failure (`f-bar`, the
//! orthogonal complement) together with the probe readout. The revised rule
//! uses the critical point `c_f` after success and `c_fbar` after failure.
//! `c_fbar = inf` encodes the usual weak-measurement convention that a
//! failed postselection never reports an interaction.
//!
//! With `p1 = |<f|i>|^2` and `p2 = |<f|A|i>|^2`, the success branch carries
//! weights `(p1 + p2)/4` on each shifted Gaussian and `(p1 - p2)/2` on the
//! interference term; the failure branch has the same form with
//! `1 - p1`, `1 - p2`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::special::{erf, erfc, erfc_inv};

/// Critical points after successful and failed postselection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossDecisionRule {
    c_f: f64,
    c_fbar: f64,
    r: f64,
}

impl LossDecisionRule {
    /// `c_fbar` may be `f64::INFINITY`; `c_f` must be finite.
    pub fn new(c_f: f64, c_fbar: f64, r: f64) -> Result<Self> {
        ensure(c_f.is_finite() && c_f >= 0.0, || {
            format!("c_f must be finite and non-negative, got {c_f}")
        })?;
        ensure(c_fbar >= 0.0 && !c_fbar.is_nan(), || {
            format!("c_fbar must be non-negative, got {c_fbar}")
        })?;
        ensure((0.0..=1.0).contains(&r), || {
            format!("boundary acceptance probability must lie in [0, 1], got {r}")
        })?;
        Ok(Self { c_f, c_fbar, r })
    }

    /// Failure always accepts the null.
    pub fn discard_failures(c_f: f64) -> Result<Self> {
        Self::new(c_f, f64::INFINITY, 1.0)
    }

    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    pub fn c_fbar(&self) -> f64 {
        self.c_fbar
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Whether the readout `x` (given the postselection outcome) rejects the null.
    /// The boundary case rejects when `coin >= r`.
    pub fn rejects(&self, postselected: bool, x: f64, sigma: f64, coin: f64) -> bool {
        let c = if postselected { self.c_f } else { self.c_fbar };
        if c.is_infinite() {
            return false;
        }
        let t = x.abs() / sigma;
        t > c || (t == c && coin >= self.r)
    }
}

/// A point of the optimisation problem: states through `p1`, `p2`, the two
/// critical points, the multiplier and the target significance level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTestPoint {
    pub p1: f64,
    pub p2: f64,
    pub c_f: f64,
    pub c_fbar: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl LossTestPoint {
    pub fn new(p1: f64, p2: f64, c_f: f64, c_fbar: f64, lambda: f64, alpha: f64) -> Result<Self> {
        ensure(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0, || {
            format!("p1 and p2 must lie in (0, 1), got {p1}, {p2}")
        })?;
        LossDecisionRule::new(c_f, c_fbar, 1.0)?;
        ensure(lambda.is_finite(), || format!("lambda must be finite, got {lambda}"))?;
        ensure(alpha > 0.0 && alpha < 1.0, || format!("alpha must lie in (0, 1), got {alpha}"))?;
        Ok(Self {
            p1,
            p2,
            c_f,
            c_fbar,
            lambda,
            alpha,
        })
    }

    pub fn rule(&self) -> LossDecisionRule {
        LossDecisionRule {
            c_f: self.c_f,
            c_fbar: self.c_fbar,
            r: 1.0,
        }
    }

    fn from_vector(v: &SVector<f64, 5>, alpha: f64) -> Self {
        Self {
            lambda: v[0],
            p1: v[1],
            p2: v[2],
            c_f: v[3],
            c_fbar: v[4],
            alpha,
        }
    }

    fn to_vector(self) -> SVector<f64, 5> {
        SVector::<f64, 5>::new(self.lambda, self.p1, self.p2, self.c_f, self.c_fbar)
    }
}

/// `erf(c / sqrt 2)`, exactly 1 at `c = inf`.
fn centred(c: f64) -> f64 {
    if c.is_infinite() {
        1.0
    } else {
        erf(c / SQRT_2)
    }
}

/// `erf[(c - g')/sqrt 2] + erf[(c + g')/sqrt 2]` with `g' = g/sigma`, exactly 2 at `c = inf`.
fn shifted(c: f64, gs: f64) -> f64 {
    if c.is_infinite() {
        2.0
    } else {
        erf((c - gs) / SQRT_2) + erf((c + gs) / SQRT_2)
    }
}

/// `d/dc erf(c / sqrt 2)`.
fn centred_slope(c: f64) -> f64 {
    (2.0 / PI).sqrt() * (-0.5 * c * c).exp()
}

/// `d/dc` of [`shifted`].
fn shifted_slope(c: f64, gs: f64) -> f64 {
    let a = c - gs;
    let b = c + gs;
    (2.0 / PI).sqrt() * ((-0.5 * a * a).exp() + (-0.5 * b * b).exp())
}

/// `P(reject | g = 0) = 1 - (erf[c_f/sqrt 2] p1 + erf[c_fbar/sqrt 2] (1 - p1))`.
pub fn loss_type1_error(pt: &LossTestPoint, _sigma: f64) -> f64 {
    let failure_tail = if pt.c_fbar.is_infinite() {
        0.0
    } else {
        erfc(pt.c_fbar / SQRT_2)
    };
    pt.p1 * erfc(pt.c_f / SQRT_2) + (1.0 - pt.p1) * failure_tail
}

/// `P(accept | g)`, summed over both postselection outcomes.
pub fn loss_type2_error(pt: &LossTestPoint, g: f64, sigma: f64) -> f64 {
    let gs = g / sigma;
    let overlap = (-0.5 * gs * gs).exp();
    0.25 * (pt.p1 + pt.p2) * shifted(pt.c_f, gs)
        + 0.25 * (2.0 - pt.p1 - pt.p2) * shifted(pt.c_fbar, gs)
        + 0.5 * (pt.p1 - pt.p2) * overlap * centred(pt.c_f)
        + 0.5 * ((1.0 - pt.p1) - (1.0 - pt.p2)) * overlap * centred(pt.c_fbar)
}

/// `P(E2) + lambda (P(E1) - alpha)`.
pub fn lagrangian(pt: &LossTestPoint, g: f64, sigma: f64) -> f64 {
    loss_type2_error(pt, g, sigma) + pt.lambda * (loss_type1_error(pt, sigma) - pt.alpha)
}

/// Partial derivatives of the Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityResiduals {
    pub d_lambda: f64,
    pub d_p1: f64,
    pub d_p2: f64,
    pub d_cf: f64,
    pub d_cfbar: f64,
}

impl StationarityResiduals {
    pub fn as_array(&self) -> [f64; 5] {
        [self.d_lambda, self.d_p1, self.d_p2, self.d_cf, self.d_cfbar]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The five partials in closed form. Both critical points must be finite.
pub fn stationarity_residuals(pt: &LossTestPoint, g: f64, sigma: f64) -> Result<StationarityResiduals> {
    ensure(pt.c_f.is_finite() && pt.c_fbar.is_finite(), || {
        "stationarity needs finite critical points".to_string()
    })?;
    Ok(residuals_unchecked(pt, g / sigma))
}

fn residuals_unchecked(pt: &LossTestPoint, gs: f64) -> StationarityResiduals {
    let overlap = (-0.5 * gs * gs).exp();
    let (s_f, s_fb) = (shifted(pt.c_f, gs), shifted(pt.c_fbar, gs));
    let (e_f, e_fb) = (centred(pt.c_f), centred(pt.c_fbar));
    let (ds_f, ds_fb) = (shifted_slope(pt.c_f, gs), shifted_slope(pt.c_fbar, gs));
    let (de_f, de_fb) = (centred_slope(pt.c_f), centred_slope(pt.c_fbar));
    let (p1, p2, lambda) = (pt.p1, pt.p2, pt.lambda);

    StationarityResiduals {
        d_lambda: p1 * (1.0 - e_f) + (1.0 - p1) * (1.0 - e_fb) - pt.alpha,
        d_p1: 0.25 * (s_f - s_fb + 2.0 * (e_f - e_fb) * overlap) + lambda * (e_fb - e_f),
        d_p2: 0.25 * (s_f - s_fb - 2.0 * (e_f - e_fb) * overlap),
        d_cf: 0.25 * ((p1 + p2) * ds_f + 2.0 * (p1 - p2) * overlap * de_f) - lambda * p1 * de_f,
        d_cfbar: 0.25 * ((2.0 - p1 - p2) * ds_fb - 2.0 * (p1 - p2) * overlap * de_fb)
            - lambda * (1.0 - p1) * de_fb,
    }
}

/// Behaviour of `P(E2)` at neighbouring points that keep `P(E1) = alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    LocalMinimum,
    LocalMaximum,
    Saddle,
    /// No neighbour changes `P(E2)` beyond the comparison tolerance.
    Flat,
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::LocalMinimum => "local_minimum",
            Classification::LocalMaximum => "local_maximum",
            Classification::Saddle => "saddle",
            Classification::Flat => "flat",
        }
    }
}

/// The stationary branch with `lambda = exp(-g^2/2 sigma^2)`.
///
/// On that branch the remaining equations force `c_f = c_fbar = 0`, so the
/// type-1 error is 1 and the constraint can only hold at `alpha = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaBranch {
    pub lambda: f64,
    pub implied_alpha: f64,
    pub rejected: bool,
}

/// Result of [`solve_stationary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarySolution {
    pub point: LossTestPoint,
    pub residuals: StationarityResiduals,
    pub classification: Classification,
    /// Set when the critical point collapsed to zero (`alpha` near 1).
    pub degenerate: bool,
    pub lambda_branch: LambdaBranch,
    /// Number of multi-starts that converged to an admissible point.
    pub converged_starts: usize,
}

impl StationarySolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.max_abs()
    }
}

/// Settings for [`solve_stationary_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub starts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            starts: 32,
            max_iterations: 400,
            tolerance: 1e-8,
            seed: 0x1055_5eed,
        }
    }
}

const P_FLOOR: f64 = 1e-9;
const DEGENERATE_C: f64 = 1e-6;

/// Finds a stationary point of the Lagrangian for the given `g`, `sigma`, `alpha`.
pub fn solve_stationary(g: f64, sigma: f64, alpha: f64) -> Result<StationarySolution> {
    solve_stationary_with(g, sigma, alpha, SolverOptions::default())
}

/// [`solve_stationary`] with explicit solver settings.
pub fn solve_stationary_with(g: f64, sigma: f64, alpha: f64, options: SolverOptions) -> Result<StationarySolution> {
    ensure(alpha > 0.0 && alpha < 1.0, || format!("alpha must lie in (0, 1), got {alpha}"))?;
    ensure(g != 0.0 && g.is_finite(), || "coupling must be nonzero and finite".to_string())?;
    ensure(sigma > 0.0 && sigma.is_finite(), || format!("sigma must be positive, got {sigma}"))?;
    ensure(options.starts > 0, || "at least one start is required".to_string())?;
    let gs = g / sigma;
    let overlap = (-0.5 * gs * gs).exp();

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let starts: Vec<LossTestPoint> = (0..options.starts)
        .map(|_| LossTestPoint {
            lambda: rng.random_range(0.1..4.0),
            p1: rng.random_range(0.05..0.95),
            p2: rng.random_range(0.05..0.95),
            c_f: rng.random_range(0.1..4.0),
            c_fbar: rng.random_range(0.1..4.0),
            alpha,
        })
        .collect();

    let runs: Vec<(LossTestPoint, f64)> = starts
        .par_iter()
        .map(|start| levenberg_marquardt(*start, gs, options))
        .collect();

    let best_residual = runs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    // Points on the lambda = overlap branch cannot meet the constraint for alpha < 1;
    // a start drifting there is discarded unless the whole family has collapsed to c = 0.
    let admissible = |pt: &LossTestPoint, res: f64| {
        res < options.tolerance
            && ((pt.lambda - overlap).abs() > 1e-6 || pt.c_f.max(pt.c_fbar) < DEGENERATE_C)
    };
    let converged: Vec<&(LossTestPoint, f64)> = runs.iter().filter(|(pt, res)| admissible(pt, *res)).collect();
    // Every converged start lies on the same family; report the one farthest
    // from the edges of the probability box.
    let interior = |pt: &LossTestPoint| pt.p1.min(1.0 - pt.p1).min(pt.p2).min(1.0 - pt.p2);
    let Some(&&(point, _)) = converged
        .iter()
        .max_by(|a, b| interior(&a.0).total_cmp(&interior(&b.0)))
    else {
        return Err(Error::NoConvergence {
            starts: options.starts,
            best_residual,
        });
    };

    Ok(StationarySolution {
        point,
        residuals: residuals_unchecked(&point, gs),
        classification: classify(&point, gs),
        degenerate: point.c_f.max(point.c_fbar) < DEGENERATE_C,
        lambda_branch: LambdaBranch {
            lambda: overlap,
            implied_alpha: 1.0,
            rejected: alpha < 1.0,
        },
        converged_starts: converged.len(),
    })
}

fn residual_vector(v: &SVector<f64, 5>, alpha: f64, gs: f64) -> SVector<f64, 5> {
    SVector::from(residuals_unchecked(&LossTestPoint::from_vector(v, alpha), gs).as_array())
}

fn project(mut v: SVector<f64, 5>) -> SVector<f64, 5> {
    v[1] = v[1].clamp(P_FLOOR, 1.0 - P_FLOOR);
    v[2] = v[2].clamp(P_FLOOR, 1.0 - P_FLOOR);
    v[3] = v[3].max(0.0);
    v[4] = v[4].max(0.0);
    v
}

/// Damped Gauss-Newton with a central-difference Jacobian, iterates kept in the feasible box.
/// Returns the final point and its largest absolute residual.
fn levenberg_marquardt(start: LossTestPoint, gs: f64, options: SolverOptions) -> (LossTestPoint, f64) {
    let alpha = start.alpha;
    let mut x = start.to_vector();
    let mut r = residual_vector(&x, alpha, gs);
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..options.max_iterations {
        if r.amax() < 1e-14 {
            break;
        }
        let mut jac = SMatrix::<f64, 5, 5>::zeros();
        for k in 0..5 {
            let h = 1e-7 * x[k].abs().max(1.0);
            let mut up = x;
            let mut down = x;
            up[k] += h;
            down[k] -= h;
            let col = (residual_vector(&up, alpha, gs) - residual_vector(&down, alpha, gs)) / (2.0 * h);
            jac.set_column(k, &col);
        }
        let jtj = jac.transpose() * jac;
        let jtr = jac.transpose() * r;
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for k in 0..5 {
                damped[(k, k)] += mu * (jtj[(k, k)] + 1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                mu *= 10.0;
                continue;
            };
            let candidate = project(x + step);
            let r_new = residual_vector(&candidate, alpha, gs);
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new < cost {
                x = candidate;
                r = r_new;
                cost = cost_new;
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (LossTestPoint::from_vector(&x, alpha), r.amax())
}

/// Compares `P(E2)` at the point with neighbours in `p1`, `p2`, `c_f`, moving
/// `c_fbar` so that the type-1 constraint still holds.
fn classify(pt: &LossTestPoint, gs: f64) -> Classification {
    let h = 1e-3;
    let tol = 1e-12;
    let centre = loss_type2_error(pt, gs, 1.0);
    let mut lower = false;
    let mut higher = false;
    for k in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut n = *pt;
            match k {
                0 => n.p1 += sign * h,
                1 => n.p2 += sign * h,
                _ => n.c_f += sign * h,
            }
            if !(n.p1 > 0.0 && n.p1 < 1.0 && n.p2 > 0.0 && n.p2 < 1.0 && n.c_f >= 0.0) {
                continue;
            }
            // 1 - E(c_fbar) = (alpha - p1 erfc(c_f/sqrt 2)) / (1 - p1)
            let tail = (n.alpha - n.p1 * erfc(n.c_f / SQRT_2)) / (1.0 - n.p1);
            if !(tail > 0.0 && tail <= 1.0) {
                continue;
            }
            n.c_fbar = SQRT_2 * erfc_inv(tail);
            let diff = loss_type2_error(&n, gs, 1.0) - centre;
            if diff > tol {
                higher = true;
            } else if diff < -tol {
                lower = true;
            }
        }
    }
    match (lower, higher) {
        (false, false) => Classification::Flat,
        (false, true) => Classification::LocalMinimum,
        (true, false) => Classification::LocalMaximum,
        (true, true) => Classification::Saddle,
    }
}
