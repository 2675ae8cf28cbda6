//! Probe position distributions after the interaction.
//!
//! Every distribution here is a mixture of at most three Gaussians with a
//! common width `sqrt(sigma^2 + s^2)` centred at `+g`, `-g` and `0`. With
//! postselection the weights are `(1 + |A_w|^2 +- 2 Re A_w)` and
//! `2 (1 - |A_w|^2) exp(-g^2/2 sigma^2)`, normalized by
//! `2 [1 + |A_w|^2 + (1 - |A_w|^2) exp(-g^2/2 sigma^2)]`; the last weight is
//! negative when `|A_w| > 1`. Without postselection only the two shifted
//! Gaussians remain, weighted by `|<+|i>|^2` and `|<-|i>|^2`.
//!
//! Additive Gaussian readout noise of width `s` only widens each component:
//! convolving Gaussians adds variances. The `exp(-g^2/2 sigma^2)` factor in
//! the weights keeps the noiseless `sigma`.
//!
//! To first order in `g` the postselected profile is the initial Gaussian
//! translated by `g Re A_w`. Nothing here relies on that approximation.

use crate::error::{ensure, Error, Result};
use crate::quadrature::Quadrature;
use crate::special::{normal_cdf, normal_interval_mass, normal_pdf};
use crate::two_state::MeasurementSetup;

/// Additive white Gaussian readout noise of standard deviation `s` (`s = 0`: noiseless).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    s: f64,
}

impl NoiseModel {
    pub fn new(s: f64) -> Result<Self> {
        ensure(s.is_finite() && s >= 0.0, || {
            format!("noise width must be finite and non-negative, got {s}")
        })?;
        Ok(Self { s })
    }

    pub fn noiseless() -> Self {
        Self { s: 0.0 }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn is_noiseless(&self) -> bool {
        self.s == 0.0
    }

    /// `sqrt(sigma^2 + s^2)`.
    pub fn effective_sd(&self, sigma: f64) -> f64 {
        sigma.hypot(self.s)
    }
}

/// Whether the system is postselected onto `|f>` before the probe is read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Postselected,
    NoPostselection,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Postselected, Mode::NoPostselection];

    pub fn label(&self) -> &'static str {
        match self {
            Mode::Postselected => "ps",
            Mode::NoPostselection => "nps",
        }
    }
}

/// One term `weight * N(x; mean, sd^2)` of a [`GaussianMixture`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
}

/// Equal-width Gaussian mixture with signed weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixture {
    pub sd: f64,
    pub components: [Component; 3],
}

impl GaussianMixture {
    pub fn density(&self, x: f64) -> f64 {
        self.components
            .iter()
            .filter(|c| c.weight != 0.0)
            .map(|c| c.weight * normal_pdf(x, c.mean, self.sd))
            .sum()
    }

    pub fn cdf(&self, upper: f64) -> f64 {
        if upper == f64::INFINITY {
            return 1.0;
        }
        let v: f64 = self
            .components
            .iter()
            .filter(|c| c.weight != 0.0)
            .map(|c| c.weight * normal_cdf(upper, c.mean, self.sd))
            .sum();
        v.clamp(0.0, 1.0)
    }

    /// Mass on the open interval `(-half_width, half_width)`.
    pub fn interval_mass(&self, half_width: f64) -> f64 {
        let v: f64 = self
            .components
            .iter()
            .filter(|c| c.weight != 0.0)
            .map(|c| c.weight * normal_interval_mass(half_width, c.mean, self.sd))
            .sum();
        v.clamp(0.0, 1.0)
    }
}

/// `1 + |A_w|^2 + (1 - |A_w|^2) exp(-g^2/2 sigma^2)`: twice the success
/// probability divided by `|<f|i>|^2`.
pub(crate) fn postselection_norm(aw_sq: f64, shift_overlap: f64) -> f64 {
    1.0 + aw_sq + (1.0 - aw_sq) * shift_overlap
}

/// Exact probe distribution for one setup, noise level and mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeDistribution {
    mixture: GaussianMixture,
    mode: Mode,
}

impl ProbeDistribution {
    pub fn new(setup: &MeasurementSetup, noise: NoiseModel, mode: Mode) -> Result<Self> {
        let g = setup.g();
        let sd = noise.effective_sd(setup.sigma());
        let components = match mode {
            Mode::Postselected => {
                let aw = setup.weak_value().ok_or(Error::ModeMismatch)?;
                let a2 = aw.norm_sqr();
                let overlap = setup.shift_overlap();
                let norm = 2.0 * postselection_norm(a2, overlap);
                [
                    Component {
                        weight: (1.0 + a2 + 2.0 * aw.re) / norm,
                        mean: g,
                    },
                    Component {
                        weight: (1.0 + a2 - 2.0 * aw.re) / norm,
                        mean: -g,
                    },
                    Component {
                        weight: 2.0 * (1.0 - a2) * overlap / norm,
                        mean: 0.0,
                    },
                ]
            }
            Mode::NoPostselection => {
                let i = setup.i_state();
                [
                    Component {
                        weight: i.plus_weight(),
                        mean: g,
                    },
                    Component {
                        weight: i.minus_weight(),
                        mean: -g,
                    },
                    Component {
                        weight: 0.0,
                        mean: 0.0,
                    },
                ]
            }
        };
        Ok(Self {
            mixture: GaussianMixture { sd, components },
            mode,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }

    pub fn density(&self, x: f64) -> f64 {
        self.mixture.density(x)
    }

    pub fn cdf(&self, upper: f64) -> f64 {
        self.mixture.cdf(upper)
    }

    /// Probability that the readout lands in `(-half_width, half_width)`.
    pub fn interval_mass(&self, half_width: f64) -> f64 {
        self.mixture.interval_mass(half_width)
    }
}

/// Probe density at `x` (the noisy readout `z` when `s > 0`).
pub fn density(setup: &MeasurementSetup, noise: NoiseModel, mode: Mode, x: f64) -> Result<f64> {
    Ok(ProbeDistribution::new(setup, noise, mode)?.density(x))
}

/// `P(readout <= upper)`.
pub fn cdf(setup: &MeasurementSetup, noise: NoiseModel, mode: Mode, upper: f64) -> Result<f64> {
    Ok(ProbeDistribution::new(setup, noise, mode)?.cdf(upper))
}

/// Half-width of the window holding all but a negligible (< 1e-30) tail of the density.
pub fn support_half_width(setup: &MeasurementSetup, noise: NoiseModel) -> f64 {
    setup.g().abs() + 12.0 * noise.effective_sd(setup.sigma())
}

/// Convolves the noiseless density with the noise kernel by adaptive
/// quadrature at each `z` and returns the largest absolute deviation from the
/// closed-form noisy density.
pub fn convolution_check(
    setup: &MeasurementSetup,
    noise: NoiseModel,
    mode: Mode,
    z_grid: &[f64],
    quad: &Quadrature,
) -> Result<f64> {
    ensure(noise.s() > 0.0, || {
        "convolution check needs a positive noise width".to_string()
    })?;
    let clean = ProbeDistribution::new(setup, NoiseModel::noiseless(), mode)?;
    let noisy = ProbeDistribution::new(setup, noise, mode)?;
    let s = noise.s();
    let reach = support_half_width(setup, NoiseModel::noiseless());
    let g = setup.g();

    let mut worst: f64 = 0.0;
    for &z in z_grid {
        let lo = (-reach).max(z - 12.0 * s);
        let hi = reach.min(z + 12.0 * s);
        let numeric = if lo < hi {
            quad.integrate_with_breaks(
                |x| clean.density(x) * normal_pdf(z - x, 0.0, s),
                lo,
                hi,
                &[-g, 0.0, g, z],
            )?
            .value
        } else {
            0.0
        };
        worst = worst.max((numeric - noisy.density(z)).abs());
    }
    Ok(worst)
}
