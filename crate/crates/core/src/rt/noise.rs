use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{invalid, Result};
use crate::math::PI;
use crate::scene::{ImageSet, ImageUnits, SensorSpec};
#[allow(unused_imports)]
use crate::prelude::*;

/// Noisy graylevel images. The exposure maps the brightest pixel over all
/// views to `headroom · full_well` expected electrons.
pub fn apply_noise(images: &ImageSet, spec: &SensorSpec, seed: u64) -> Result<ImageSet> {
    let m = images.max();
    let scale = if m > 0.0 { spec.peak_electrons() / m } else { 0.0 };
    apply_noise_with_scale(images, spec, scale, seed)
}

/// Noise operator with an explicit exposure (expected electrons per unit
/// radiance): Poisson photo-electrons, Gaussian readout, gain, quantization
/// and clipping to the ADC range.
pub fn apply_noise_with_scale(
    images: &ImageSet,
    spec: &SensorSpec,
    electrons_per_radiance: f64,
    seed: u64,
) -> Result<ImageSet> {
    spec.validate()?;
    images.validate()?;
    if images.units != ImageUnits::Radiance {
        return Err(invalid("noise is applied to radiance images"));
    }
    if !(electrons_per_radiance >= 0.0 && electrons_per_radiance.is_finite()) {
        return Err(invalid("exposure must be finite and >= 0"));
    }
    if images.data.iter().flatten().any(|v| *v < 0.0) {
        return Err(invalid("radiance must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let readout = Normal::new(0.0, spec.readout_std).map_err(|e| invalid(alloc::format!("{e}")))?;
    let top = spec.max_graylevel();
    let data: Vec<Vec<f64>> = images
        .data
        .iter()
        .map(|img| {
            img.iter()
                .map(|r| {
                    let mu = r * electrons_per_radiance;
                    let e = if mu > 0.0 {
                        Poisson::new(mu).map(|p| p.sample(&mut rng)).unwrap_or(mu)
                    } else {
                        0.0
                    };
                    let e = e + readout.sample(&mut rng);
                    (e / spec.gain).round().clamp(0.0, top)
                })
                .collect()
        })
        .collect();
    ImageSet::new(
        ImageUnits::Graylevel,
        images.widths.clone(),
        images.heights.clone(),
        data,
        Some(electrons_per_radiance),
    )
}

/// Gaussian approximation of the Poisson-plus-readout likelihood of one
/// observed graylevel given the expected photo-electron count.
pub fn pixel_likelihood(graylevel: f64, expected_electrons: f64, spec: &SensorSpec) -> f64 {
    let var = expected_electrons.max(0.0) + spec.readout_std * spec.readout_std;
    let r = graylevel * spec.gain - expected_electrons;
    -0.5 * (2.0 * PI * var).ln() - r * r / (2.0 * var)
}

/// Sum of [`pixel_likelihood`] over matching graylevel and expected-electron
/// images.
pub fn log_likelihood(observed: &ImageSet, expected_electrons: &ImageSet, spec: &SensorSpec) -> Result<f64> {
    if observed.data.len() != expected_electrons.data.len()
        || observed.data.iter().zip(&expected_electrons.data).any(|(a, b)| a.len() != b.len())
    {
        return Err(crate::error::shape("observed and expected images differ in shape"));
    }
    Ok(observed
        .data
        .iter()
        .zip(&expected_electrons.data)
        .flat_map(|(a, b)| a.iter().zip(b))
        .map(|(g, e)| pixel_likelihood(*g, *e, spec))
        .sum())
}
