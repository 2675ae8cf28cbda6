#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wva_core::{MeasurementSetup, NoiseModel, TwoStateVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Balanced preselection, weak value `5i`: the even double-peak configuration.
pub fn double_peak(g: f64) -> MeasurementSetup {
    MeasurementSetup::with_weak_value(TwoStateVector::balanced(), Complex64::new(0.0, 5.0), g, 1.0).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng) -> TwoStateVector {
    loop {
        let parts: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        if let Ok(s) = TwoStateVector::from_parts(parts[0], parts[1], parts[2], parts[3]) {
            if s.plus_weight() > 0.01 && s.minus_weight() > 0.01 {
                return s;
            }
        }
    }
}

/// Random preselection with a postselected state giving a random weak value of modulus up to 10.
pub fn random_setup(rng: &mut ChaCha8Rng) -> MeasurementSetup {
    let i = random_state(rng);
    let aw = Complex64::from_polar(rng.random_range(0.0..10.0), rng.random_range(-3.2..3.2));
    let g = rng.random_range(-4.0..4.0);
    let sigma = rng.random_range(0.3..3.0);
    MeasurementSetup::with_weak_value(i, aw, g, sigma).unwrap()
}

pub fn random_noise(rng: &mut ChaCha8Rng, sigma: f64) -> NoiseModel {
    if rng.random::<bool>() {
        NoiseModel::noiseless()
    } else {
        NoiseModel::new(rng.random_range(0.0..1.5) * sigma).unwrap()
    }
}

/// Probe density after postselection from the wavefunction
/// `a+ psi(x - g) + a- psi(x + g)`, normalised numerically.
pub fn amplitude_density(setup: &MeasurementSetup, x: f64) -> f64 {
    let (ap, am) = setup.branch_amplitudes().unwrap();
    let s = setup.sigma();
    let psi = |u: f64| (2.0 * std::f64::consts::PI * s * s).powf(-0.25) * (-u * u / (4.0 * s * s)).exp();
    (ap * psi(x - setup.g()) + am * psi(x + setup.g())).norm_sqr()
}
