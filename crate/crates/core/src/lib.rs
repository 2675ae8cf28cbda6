//! Hypothesis testing for the detection of a weak interaction between a
//! two-state system and a Gaussian probe, with and without postselection.
//!
//! The library computes the probe distributions, the error probabilities of
//! the `|x|/sigma` test in both measurement modes, optimality certificates,
//! the loss-aware revised test, and a Monte Carlo sampler of the physical
//! process that serves as an independent check of every closed form.

pub mod error;
pub mod hypothesis;
pub mod loss;
pub mod monte_carlo;
pub mod probe;
pub mod quadrature;
pub mod special;
pub mod two_state;

pub use error::{Error, Result};
pub use hypothesis::{
    critical_point_for_alpha, decide, power, type1_error, type2_error, Decision, DecisionRule,
    ErrorReport, UmpuCertificate,
};
pub use loss::{LossDecisionRule, LossTestPoint, StationarySolution};
pub use probe::{Mode, NoiseModel, ProbeDistribution};
pub use two_state::{success_probability, weak_value, MeasurementSetup, TwoStateVector};
