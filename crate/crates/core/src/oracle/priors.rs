use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::{gauss_legendre, PI};
#[allow(unused_imports)]
use crate::prelude::*;

/// Density over extinction [km⁻¹] that can also be sampled.
pub trait Prior {
    /// Normalized density at `beta` (zero for negative values).
    fn density(&self, beta: f64) -> f64;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64
    where
        Self: Sized;
}

/// Two-component Gaussian mixture truncated to `β ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BimodalPrior {
    pub means: [f64; 2],
    pub std: f64,
    pub weights: [f64; 2],
}

impl Default for BimodalPrior {
    fn default() -> Self {
        BimodalPrior {
            means: [42.0, 75.0],
            std: 5.0,
            weights: [0.75, 0.25],
        }
    }
}

impl BimodalPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.std > 0.0) {
            return Err(invalid("mode STD must be positive"));
        }
        if self.weights.iter().any(|w| *w < 0.0) || ((self.weights[0] + self.weights[1]) - 1.0).abs() > 1e-12 {
            return Err(invalid("mode weights must be non-negative and sum to 1"));
        }
        Ok(())
    }

    /// Which mode a draw came from, and the draw.
    pub fn sample_with_mode<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let mode = usize::from(rng.random::<f64>() >= self.weights[0]);
        let n = Normal::new(self.means[mode], self.std).expect("validated std");
        loop {
            let b = n.sample(rng);
            if b >= 0.0 {
                return (mode, b);
            }
        }
    }

    /// One draw from a generator seeded with `seed`.
    pub fn sample_seeded(&self, seed: u64) -> f64 {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn truncation_mass(&self) -> f64 {
        // P(β ≥ 0) of the untruncated mixture.
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| w * 0.5 * libm::erfc(-m / (self.std * core::f64::consts::SQRT_2)))
            .sum()
    }
}

impl Prior for BimodalPrior {
    fn density(&self, beta: f64) -> f64 {
        if beta < 0.0 {
            return 0.0;
        }
        let g = |m: f64| {
            let z = (beta - m) / self.std;
            (-0.5 * z * z).exp() / (self.std * (2.0 * PI).sqrt())
        };
        (self.weights[0] * g(self.means[0]) + self.weights[1] * g(self.means[1])) / self.truncation_mass()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_with_mode(rng).1
    }
}

/// Density `∝ (s/β)·exp(−k[ln(β/s) + 1]²)`, i.e. `ln(β/s) ~ N(−1, 1/(2k))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "LogNormalParams", into = "LogNormalParams")]
pub struct LogNormalPrior {
    pub scale: f64,
    pub sharpness: f64,
    /// Normalizer of the unnormalized density, found by quadrature.
    norm: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogNormalParams {
    #[serde(default = "default_scale")]
    scale: f64,
    #[serde(default = "default_sharpness")]
    sharpness: f64,
}

fn default_scale() -> f64 {
    160.0
}

fn default_sharpness() -> f64 {
    8.0
}

impl From<LogNormalParams> for LogNormalPrior {
    fn from(p: LogNormalParams) -> Self {
        LogNormalPrior::new(p.scale, p.sharpness)
    }
}

impl From<LogNormalPrior> for LogNormalParams {
    fn from(p: LogNormalPrior) -> Self {
        LogNormalParams {
            scale: p.scale,
            sharpness: p.sharpness,
        }
    }
}

impl Default for LogNormalPrior {
    fn default() -> Self {
        LogNormalPrior::new(160.0, 8.0)
    }
}

impl LogNormalPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.sharpness > 0.0) {
            return Err(invalid("log-normal scale and sharpness must be positive"));
        }
        Ok(())
    }

    pub fn new(scale: f64, sharpness: f64) -> Self {
        let mut p = LogNormalPrior {
            scale,
            sharpness,
            norm: 1.0,
        };
        p.norm = p.integrate(|_| 1.0);
        p
    }

    fn raw(&self, beta: f64) -> f64 {
        if beta <= 0.0 {
            return 0.0;
        }
        let u = (beta / self.scale).ln() + 1.0;
        self.scale / beta * (-self.sharpness * u * u).exp()
    }

    /// `∫ f(β) raw(β) dβ / norm` by Gauss–Legendre in `ln β` over ±12 STD.
    fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let sd = (0.5 / self.sharpness).sqrt();
        let (lo, hi) = (-1.0 - 12.0 * sd, -1.0 + 12.0 * sd);
        let (x, w) = gauss_legendre(200);
        let h = 0.5 * (hi - lo);
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let u = lo + h * (xi + 1.0);
                let b = self.scale * u.exp();
                // dβ = β du
                wi * h * f(b) * self.raw(b) * b
            })
            .sum::<f64>()
            / self.norm
    }

    /// Mean and STD of the density by quadrature.
    pub fn moments(&self) -> (f64, f64) {
        let m = self.integrate(|b| b);
        let v = self.integrate(|b| (b - m) * (b - m));
        (m, v.sqrt())
    }
}

impl Prior for LogNormalPrior {
    fn density(&self, beta: f64) -> f64 {
        self.raw(beta) / self.norm
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = Normal::new(-1.0, (0.5 / self.sharpness).sqrt()).expect("positive sharpness");
        self.scale * n.sample(rng).exp()
    }
}
