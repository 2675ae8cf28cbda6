//! The measured two-state system: pre/postselected states, the weak value of
//! `A = |+><+| - |-><-|`, and the postselection success probability.

use num_complex::Complex64;

use crate::error::{ensure, Error, Result};

/// Overlaps `|<f|i>|` at or below this are treated as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// A normalized state `plus |+> + minus |->` in the eigenbasis of `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateVector {
    plus: Complex64,
    minus: Complex64,
}

impl TwoStateVector {
    /// Builds a state from (possibly unnormalized) amplitudes.
    pub fn new(plus: Complex64, minus: Complex64) -> Result<Self> {
        let norm = (plus.norm_sqr() + minus.norm_sqr()).sqrt();
        ensure(norm.is_finite() && norm > 0.0, || {
            format!("state amplitudes must be finite and not both zero, got ({plus}, {minus})")
        })?;
        Ok(Self {
            plus: plus / norm,
            minus: minus / norm,
        })
    }

    /// Builds a state from the real and imaginary parts of both amplitudes.
    pub fn from_parts(plus_re: f64, plus_im: f64, minus_re: f64, minus_im: f64) -> Result<Self> {
        Self::new(
            Complex64::new(plus_re, plus_im),
            Complex64::new(minus_re, minus_im),
        )
    }

    /// The `+1` eigenstate `|+>`.
    pub fn plus_state() -> Self {
        Self {
            plus: Complex64::new(1.0, 0.0),
            minus: Complex64::new(0.0, 0.0),
        }
    }

    /// The `-1` eigenstate `|->`.
    pub fn minus_state() -> Self {
        Self {
            plus: Complex64::new(0.0, 0.0),
            minus: Complex64::new(1.0, 0.0),
        }
    }

    /// `(|+> + |->)/sqrt(2)`.
    pub fn balanced() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { plus: a, minus: a }
    }

    pub fn plus_amp(&self) -> Complex64 {
        self.plus
    }

    pub fn minus_amp(&self) -> Complex64 {
        self.minus
    }

    /// `|<+|self>|^2`.
    pub fn plus_weight(&self) -> f64 {
        self.plus.norm_sqr()
    }

    /// `|<-|self>|^2`.
    pub fn minus_weight(&self) -> f64 {
        self.minus.norm_sqr()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.plus.conj() * other.plus + self.minus.conj() * other.minus
    }

    /// `<self|A|other>`.
    pub fn observable_element(&self, other: &Self) -> Complex64 {
        self.plus.conj() * other.plus - self.minus.conj() * other.minus
    }

    /// `A|self>`.
    pub fn apply_observable(&self) -> Self {
        Self {
            plus: self.plus,
            minus: -self.minus,
        }
    }

    /// The state orthogonal to `self` (unique up to phase).
    pub fn orthogonal_complement(&self) -> Self {
        Self {
            plus: -self.minus.conj(),
            minus: self.plus.conj(),
        }
    }

    /// Multiplies both amplitudes by `exp(i theta)`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        Self {
            plus: self.plus * phase,
            minus: self.minus * phase,
        }
    }

    /// The postselected state giving weak value `target` for preselection `self`.
    ///
    /// Solves `<f|A|i> = target <f|i>`, i.e. `f+* i+ (1 - target) = f-* i- (1 + target)`.
    /// An eigenstate preselection only reaches `target = +-1`, so it is rejected.
    pub fn postselection_for_weak_value(&self, target: Complex64) -> Result<Self> {
        ensure(
            self.plus.norm() > ORTHOGONALITY_TOL && self.minus.norm() > ORTHOGONALITY_TOL,
            || "preselected state is an eigenstate of A; its weak value is fixed".to_string(),
        )?;
        let one = Complex64::new(1.0, 0.0);
        let f_plus = ((one + target) / self.plus).conj();
        let f_minus = ((one - target) / self.minus).conj();
        Self::new(f_plus, f_minus)
    }
}

/// Weak value `<f|A|i>/<f|i>`.
pub fn weak_value(i: &TwoStateVector, f: &TwoStateVector) -> Result<Complex64> {
    let overlap = f.inner(i);
    if overlap.norm() <= ORTHOGONALITY_TOL {
        return Err(Error::OrthogonalPostselection {
            overlap: overlap.norm(),
        });
    }
    Ok(f.observable_element(i) / overlap)
}

/// Coupling, probe width and system states of one weak-measurement experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSetup {
    i_state: TwoStateVector,
    f_state: Option<TwoStateVector>,
    g: f64,
    sigma: f64,
    weak_value: Option<Complex64>,
    transition_probability: Option<f64>,
}

impl MeasurementSetup {
    /// Validates the setup and derives the weak value and `|<f|i>|^2`.
    pub fn new(
        i_state: TwoStateVector,
        f_state: Option<TwoStateVector>,
        g: f64,
        sigma: f64,
    ) -> Result<Self> {
        ensure(sigma.is_finite() && sigma > 0.0, || {
            format!("sigma must be positive and finite, got {sigma}")
        })?;
        ensure(g.is_finite(), || format!("g must be finite, got {g}"))?;
        let (weak_value, transition_probability) = match &f_state {
            Some(f) => (Some(weak_value(&i_state, f)?), Some(f.inner(&i_state).norm_sqr())),
            None => (None, None),
        };
        Ok(Self {
            i_state,
            f_state,
            g,
            sigma,
            weak_value,
            transition_probability,
        })
    }

    /// Preselection `i` with a postselected state chosen so that the weak value is `target`.
    pub fn with_weak_value(
        i_state: TwoStateVector,
        target: Complex64,
        g: f64,
        sigma: f64,
    ) -> Result<Self> {
        let f = i_state.postselection_for_weak_value(target)?;
        Self::new(i_state, Some(f), g, sigma)
    }

    /// Same states and width, different coupling.
    pub fn with_g(&self, g: f64) -> Result<Self> {
        ensure(g.is_finite(), || format!("g must be finite, got {g}"))?;
        Ok(Self { g, ..*self })
    }

    pub fn i_state(&self) -> &TwoStateVector {
        &self.i_state
    }

    pub fn f_state(&self) -> Option<&TwoStateVector> {
        self.f_state.as_ref()
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Weak value, present when a postselected state is set.
    pub fn weak_value(&self) -> Option<Complex64> {
        self.weak_value
    }

    /// `|<f|i>|^2`, present when a postselected state is set.
    pub fn transition_probability(&self) -> Option<f64> {
        self.transition_probability
    }

    /// `(f+* i+, f-* i-)`: the amplitudes multiplying `psi(x - g)` and
    /// `psi(x + g)` in the postselected probe wavefunction.
    pub fn branch_amplitudes(&self) -> Result<(Complex64, Complex64)> {
        let f = self.f_state.as_ref().ok_or(Error::ModeMismatch)?;
        Ok((
            f.plus_amp().conj() * self.i_state.plus_amp(),
            f.minus_amp().conj() * self.i_state.minus_amp(),
        ))
    }

    /// `exp(-g^2 / 2 sigma^2)`, the overlap of the two shifted probe wavefunctions.
    pub fn shift_overlap(&self) -> f64 {
        (-self.g * self.g / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Probability that postselection onto `f` succeeds after the interaction:
/// `(|<f|i>|^2 / 2) [ (1 + |A_w|^2) + (1 - |A_w|^2) exp(-g^2/2 sigma^2) ]`.
pub fn success_probability(setup: &MeasurementSetup) -> Result<f64> {
    let (aw, p1) = match (setup.weak_value(), setup.transition_probability()) {
        (Some(aw), Some(p1)) => (aw, p1),
        _ => return Err(Error::ModeMismatch),
    };
    let a2 = aw.norm_sqr();
    Ok(0.5 * p1 * ((1.0 + a2) + (1.0 - a2) * setup.shift_overlap()))
}
