//! Sampling the physical measurement process.
//!
//! Samples are drawn from the probe wavefunction after the interaction,
//! `a+ psi(x - g) + a- psi(x + g)`, using the branch amplitudes `a+-` rather
//! than the closed-form mixture weights, and readout noise is added as an
//! independent Gaussian draw. The estimates therefore check the analytic
//! formulas instead of restating them.
//!
//! Work is split into fixed-size shards. Shard `k` draws from ChaCha stream
//! `k` of the batch seed, so a batch depends only on its seed and
//! parameters, not on the number of worker threads.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::hypothesis::{decide, Decision, DecisionRule};
use crate::loss::LossDecisionRule;
use crate::probe::NoiseModel;
use crate::two_state::MeasurementSetup;

/// Trials per shard.
pub const SHARD_SIZE: usize = 1 << 16;

/// Statistical tolerance, in binomial standard deviations.
pub const BAND_SIGMAS: f64 = 4.0;

const COIN_STREAM: u64 = 0x636f_696e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleKind {
    /// Readouts conditioned on successful postselection.
    Postselected,
    /// Readouts without any postselection.
    NoPostselection,
    /// Every trial, with its postselection outcome.
    FullProcess,
}

/// One trial. `postselected` is true for every outcome of a
/// [`SampleKind::Postselected`] batch and for none of a
/// [`SampleKind::NoPostselection`] batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub postselected: bool,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub seed: u64,
    pub kind: SampleKind,
    pub g: f64,
    pub sigma: f64,
    pub outcomes: Vec<Outcome>,
    /// Fraction of rejection-sampling proposals accepted, when rejection sampling was used.
    pub acceptance_rate: Option<f64>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn readouts(&self) -> impl Iterator<Item = f64> + '_ {
        self.outcomes.iter().map(|o| o.x)
    }

    /// Fraction of trials in which postselection succeeded.
    pub fn success_frequency(&self) -> f64 {
        self.outcomes.iter().filter(|o| o.postselected).count() as f64 / self.len() as f64
    }
}

/// A frequency with its `4 sigma` binomial half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyEstimate {
    pub value: f64,
    pub half_width: f64,
    pub trials: usize,
}

impl FrequencyEstimate {
    fn from_counts(hits: usize, trials: usize) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            value: p,
            half_width: BAND_SIGMAS * (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }

    /// Whether `expected` lies within `4 sqrt(P(1 - P)/n)` of the estimate, using the expected `P`.
    pub fn agrees_with(&self, expected: f64) -> bool {
        let band = BAND_SIGMAS * (expected * (1.0 - expected) / self.trials as f64).sqrt();
        (self.value - expected).abs() <= band
    }
}

/// The postselected probe state for one outcome, described by its branch amplitudes.
#[derive(Debug, Clone, Copy)]
struct BranchSampler {
    a_plus: Complex64,
    a_minus: Complex64,
    g: f64,
    sigma: f64,
    /// `|a+|^2`, `|a-|^2` and `|2 Re(conj(a+) a-) e^{-g^2/2 sigma^2}|`: envelope masses at `+g`, `-g`, `0`.
    envelope_masses: [f64; 3],
    envelope_total: f64,
    /// Probability of this outcome, `int |a+ psi(x - g) + a- psi(x + g)|^2 dx`.
    probability: f64,
}

impl BranchSampler {
    fn new(a_plus: Complex64, a_minus: Complex64, g: f64, sigma: f64) -> Self {
        let overlap = (-g * g / (2.0 * sigma * sigma)).exp();
        let cross = 2.0 * (a_plus.conj() * a_minus).re * overlap;
        let envelope_masses = [a_plus.norm_sqr(), a_minus.norm_sqr(), cross.abs()];
        Self {
            a_plus,
            a_minus,
            g,
            sigma,
            envelope_masses,
            envelope_total: envelope_masses.iter().sum(),
            probability: a_plus.norm_sqr() + a_minus.norm_sqr() + cross,
        }
    }

    fn amplitude(&self, x: f64) -> f64 {
        let norm = (2.0 * PI * self.sigma * self.sigma).powf(-0.25);
        norm * (-x * x / (4.0 * self.sigma * self.sigma)).exp()
    }

    /// Unnormalised target `|a+ psi(x - g) + a- psi(x + g)|^2`.
    fn target(&self, x: f64) -> f64 {
        (self.a_plus * self.amplitude(x - self.g) + self.a_minus * self.amplitude(x + self.g)).norm_sqr()
    }

    fn envelope(&self, x: f64) -> f64 {
        let pdf = |mean: f64| {
            let z = (x - mean) / self.sigma;
            (-0.5 * z * z).exp() / (self.sigma * (2.0 * PI).sqrt())
        };
        self.envelope_masses[0] * pdf(self.g) + self.envelope_masses[1] * pdf(-self.g) + self.envelope_masses[2] * pdf(0.0)
    }

    /// Draws one noiseless readout. Returns it with the number of proposals used.
    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(f64, u64)> {
        if self.g == 0.0 {
            return Ok((self.sigma * rng.sample::<f64, _>(StandardNormal), 1));
        }
        let mut proposals = 0;
        loop {
            proposals += 1;
            let pick = rng.random::<f64>() * self.envelope_total;
            let mean = if pick < self.envelope_masses[0] {
                self.g
            } else if pick < self.envelope_masses[0] + self.envelope_masses[1] {
                -self.g
            } else {
                0.0
            };
            let x = mean + self.sigma * rng.sample::<f64, _>(StandardNormal);
            let target = self.target(x);
            let envelope = self.envelope(x);
            if target > envelope * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::EnvelopeViolation { x, target, envelope });
            }
            if rng.random::<f64>() * envelope < target {
                return Ok((x, proposals));
            }
        }
    }
}

fn shard_rng(seed: u64, shard: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard as u64);
    rng
}

/// Runs `trial` `n` times across shards; returns outcomes in trial order and the total proposal count.
fn run_sharded<F>(n: usize, seed: u64, trial: F) -> Result<(Vec<Outcome>, u64)>
where
    F: Fn(&mut ChaCha8Rng) -> Result<(Outcome, u64)> + Sync,
{
    let shards = n.div_ceil(SHARD_SIZE);
    let parts: Vec<Result<(Vec<Outcome>, u64)>> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let mut rng = shard_rng(seed, k);
            let count = SHARD_SIZE.min(n - k * SHARD_SIZE);
            let mut out = Vec::with_capacity(count);
            let mut proposals = 0;
            for _ in 0..count {
                let (o, p) = trial(&mut rng)?;
                out.push(o);
                proposals += p;
            }
            Ok((out, proposals))
        })
        .collect();
    let mut outcomes = Vec::with_capacity(n);
    let mut proposals = 0;
    for part in parts {
        let (o, p) = part?;
        outcomes.extend(o);
        proposals += p;
    }
    Ok((outcomes, proposals))
}

fn add_noise(x: f64, noise: NoiseModel, rng: &mut ChaCha8Rng) -> f64 {
    if noise.is_noiseless() {
        x
    } else {
        x + noise.s() * rng.sample::<f64, _>(StandardNormal)
    }
}

fn check_count(n: usize) -> Result<()> {
    ensure(n >= 1, || "sample count must be at least 1".to_string())
}

/// Readouts conditioned on successful postselection, by rejection sampling
/// from a three-Gaussian envelope, then blurred by the readout noise.
pub fn sample_postselected(setup: &MeasurementSetup, noise: NoiseModel, n: usize, seed: u64) -> Result<SampleBatch> {
    check_count(n)?;
    let (a_plus, a_minus) = setup.branch_amplitudes()?;
    let sampler = BranchSampler::new(a_plus, a_minus, setup.g(), setup.sigma());
    let (outcomes, proposals) = run_sharded(n, seed, |rng| {
        let (x, p) = sampler.draw(rng)?;
        Ok((
            Outcome {
                postselected: true,
                x: add_noise(x, noise, rng),
            },
            p,
        ))
    })?;
    Ok(SampleBatch {
        seed,
        kind: SampleKind::Postselected,
        g: setup.g(),
        sigma: setup.sigma(),
        outcomes,
        acceptance_rate: Some(n as f64 / proposals as f64),
    })
}

/// Readouts without postselection: the system is found in `+-` with
/// probability `|<+-|i>|^2`, shifting the probe by `+-g`.
pub fn sample_no_postselection(setup: &MeasurementSetup, noise: NoiseModel, n: usize, seed: u64) -> Result<SampleBatch> {
    check_count(n)?;
    let p_plus = setup.i_state().plus_weight();
    let (g, sigma) = (setup.g(), setup.sigma());
    let (outcomes, _) = run_sharded(n, seed, |rng| {
        let shift = if rng.random::<f64>() < p_plus { g } else { -g };
        let x = shift + sigma * rng.sample::<f64, _>(StandardNormal);
        Ok((
            Outcome {
                postselected: false,
                x: add_noise(x, noise, rng),
            },
            1,
        ))
    })?;
    Ok(SampleBatch {
        seed,
        kind: SampleKind::NoPostselection,
        g,
        sigma,
        outcomes,
        acceptance_rate: None,
    })
}

/// Every trial of the postselected experiment: postselection onto `f`
/// succeeds or fails (projecting onto its orthogonal complement), and the
/// readout is drawn from the probe state of that outcome.
pub fn sample_full_process(setup: &MeasurementSetup, noise: NoiseModel, n: usize, seed: u64) -> Result<SampleBatch> {
    check_count(n)?;
    let f = setup.f_state().ok_or(Error::ModeMismatch)?;
    let i = setup.i_state();
    let fbar = f.orthogonal_complement();
    let (g, sigma) = (setup.g(), setup.sigma());
    let success = BranchSampler::new(f.plus_amp().conj() * i.plus_amp(), f.minus_amp().conj() * i.minus_amp(), g, sigma);
    let failure = BranchSampler::new(
        fbar.plus_amp().conj() * i.plus_amp(),
        fbar.minus_amp().conj() * i.minus_amp(),
        g,
        sigma,
    );
    let p_success = success.probability / (success.probability + failure.probability);
    let (outcomes, proposals) = run_sharded(n, seed, |rng| {
        let postselected = rng.random::<f64>() < p_success;
        let branch = if postselected { &success } else { &failure };
        let (x, p) = branch.draw(rng)?;
        Ok((
            Outcome {
                postselected,
                x: add_noise(x, noise, rng),
            },
            p,
        ))
    })?;
    Ok(SampleBatch {
        seed,
        kind: SampleKind::FullProcess,
        g,
        sigma,
        outcomes,
        acceptance_rate: Some(n as f64 / proposals as f64),
    })
}

/// Frequency of wrong decisions of the `|x|/sigma` rule: rejections when the
/// batch was drawn at `g = 0`, acceptances otherwise.
///
/// For a full-process batch only the successfully postselected trials are used.
pub fn empirical_error(batch: &SampleBatch, rule: &DecisionRule) -> Result<FrequencyEstimate> {
    let mut coins = ChaCha8Rng::seed_from_u64(batch.seed ^ COIN_STREAM);
    let mut trials = 0;
    let mut wrong = 0;
    for o in &batch.outcomes {
        if batch.kind == SampleKind::FullProcess && !o.postselected {
            continue;
        }
        trials += 1;
        let t = o.x.abs() / batch.sigma;
        let coin = if t == rule.c() { coins.random::<f64>() } else { 0.0 };
        let rejected = decide(o.x, batch.sigma, rule, coin) == Decision::RejectNull;
        if rejected == (batch.g == 0.0) {
            wrong += 1;
        }
    }
    if trials == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(FrequencyEstimate::from_counts(wrong, trials))
}

/// Frequency of wrong decisions of the revised rule over every trial of a full-process batch.
pub fn empirical_loss_error(batch: &SampleBatch, rule: &LossDecisionRule) -> Result<FrequencyEstimate> {
    ensure(batch.kind == SampleKind::FullProcess, || {
        "the revised rule needs the postselection outcome of every trial".to_string()
    })?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut coins = ChaCha8Rng::seed_from_u64(batch.seed ^ COIN_STREAM);
    let wrong = batch
        .outcomes
        .iter()
        .filter(|o| {
            let coin = coins.random::<f64>();
            rule.rejects(o.postselected, o.x, batch.sigma, coin) == (batch.g == 0.0)
        })
        .count();
    Ok(FrequencyEstimate::from_counts(wrong, batch.len()))
}

/// Empirical success frequency of a full-process batch.
pub fn empirical_success(batch: &SampleBatch) -> Result<FrequencyEstimate> {
    ensure(batch.kind == SampleKind::FullProcess, || {
        "success frequency needs a full-process batch".to_string()
    })?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let hits = batch.outcomes.iter().filter(|o| o.postselected).count();
    Ok(FrequencyEstimate::from_counts(hits, batch.len()))
}

/// Kolmogorov-Smirnov distance between the empirical distribution of `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).max((k + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// The `1.95 / sqrt(n)` acceptance threshold for [`ks_statistic`].
pub fn ks_threshold(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}
