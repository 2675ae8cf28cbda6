use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The postselected state is orthogonal to the preselected one, so the
    /// weak value is undefined and postselection never succeeds.
    #[error("postselected state is orthogonal to the preselected state (|<f|i>| = {overlap:e})")]
    OrthogonalPostselection { overlap: f64 },

    /// A postselected quantity was requested for a setup without a postselected state.
    #[error("postselected mode requires a postselected state")]
    ModeMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("adaptive quadrature did not converge on [{lower}, {upper}] (error estimate {error_estimate:e})")]
    QuadratureFailure {
        lower: f64,
        upper: f64,
        error_estimate: f64,
    },

    #[error("ratio denominator is degenerate ({denominator:e})")]
    DivisionDegenerate { denominator: f64 },

    /// The likelihood ratio is not a function of |x|/sigma alone for this setup.
    #[error("evenness premise violated: {0}")]
    PremiseViolated(String),

    #[error("solver did not converge after {starts} starts (best residual {best_residual:e})")]
    NoConvergence { starts: usize, best_residual: f64 },

    #[error("target density {target:e} exceeds rejection envelope {envelope:e} at x = {x}")]
    EnvelopeViolation { x: f64, target: f64, envelope: f64 },

    #[error("sample batch is empty")]
    EmptyBatch,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
