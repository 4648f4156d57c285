//! Seeded data perturbations.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::xray::Sinogram;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NoiseSpec {
    #[default]
    None,
    /// Additive i.i.d. normal noise with `sigma = level * max|s|`.
    Gaussian { level: f64, seed: u64 },
    /// Poisson counts after scaling the data to `[0, peak]`.
    Poisson { peak: f64, seed: u64 },
}

impl NoiseSpec {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseSpec::None => "none",
            NoiseSpec::Gaussian { .. } => "gaussian",
            NoiseSpec::Poisson { .. } => "poisson",
        }
    }

    pub fn apply(&self, s: &Sinogram) -> Result<Sinogram> {
        match *self {
            NoiseSpec::None => Ok(s.clone()),
            NoiseSpec::Gaussian { level, seed } => add_gaussian_noise(s, level, seed),
            NoiseSpec::Poisson { peak, seed } => poisson_modulate(s, peak, seed),
        }
    }
}

pub fn add_gaussian_noise(s: &Sinogram, rel_level: f64, seed: u64) -> Result<Sinogram> {
    if !(rel_level >= 0.0 && rel_level.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "noise level must be nonnegative, got {rel_level}"
        )));
    }
    let sigma = rel_level * s.max_abs();
    if sigma == 0.0 {
        return Ok(s.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(s.map(|v| v + normal.sample(&mut rng)))
}

/// Scales `s` to peak `peak`, draws a Poisson count per entry and scales
/// back. Negative entries are clipped to 0.
pub fn poisson_modulate(s: &Sinogram, peak: f64, seed: u64) -> Result<Sinogram> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("peak must be positive, got {peak}")));
    }
    let max = s.values().iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(s.clone());
    }
    if s.values().iter().any(|&v| v < 0.0) {
        log::warn!("clipping negative sinogram entries before Poisson sampling");
    }
    let scale = peak / max;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(s.map(|v| {
        let mean = v.max(0.0) * scale;
        let count = if mean > 0.0 {
            Poisson::new(mean).expect("mean is positive and finite").sample(&mut rng)
        } else {
            0.0
        };
        count / scale
    }))
}
