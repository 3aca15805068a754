use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
#[allow(unused_imports)]
use crate::prelude::*;

/// Piecewise-linear molecular extinction profile β_air(z), altitude in metres,
/// values in km⁻¹ at the 672 nm reference band. Clamped outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirProfile {
    pub altitudes_m: Vec<f64>,
    pub beta_km: Vec<f64>,
}

impl AirProfile {
    pub fn new(altitudes_m: Vec<f64>, beta_km: Vec<f64>) -> Result<Self> {
        let p = AirProfile {
            altitudes_m,
            beta_km,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.altitudes_m.is_empty() || self.altitudes_m.len() != self.beta_km.len() {
            return Err(invalid("air profile needs matching, non-empty tables"));
        }
        if self.altitudes_m.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("air profile altitudes must be strictly increasing"));
        }
        if self.beta_km.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(invalid("air extinction must be finite and >= 0"));
        }
        Ok(())
    }

    /// No molecular extinction.
    pub fn vacuum() -> Self {
        AirProfile {
            altitudes_m: alloc::vec![0.0],
            beta_km: alloc::vec![0.0],
        }
    }

    /// `beta0 * exp(-z / scale_height)` tabulated every 500 m over 0–20 km.
    pub fn exponential(beta0_km: f64, scale_height_m: f64) -> Self {
        let altitudes_m: Vec<f64> = (0..=40).map(|i| i as f64 * 500.0).collect();
        let beta_km = altitudes_m
            .iter()
            .map(|z| beta0_km * (-z / scale_height_m).exp())
            .collect();
        AirProfile {
            altitudes_m,
            beta_km,
        }
    }

    pub fn beta_at(&self, z: f64) -> f64 {
        let a = &self.altitudes_m;
        let b = &self.beta_km;
        if z <= a[0] {
            return b[0];
        }
        if z >= a[a.len() - 1] {
            return b[b.len() - 1];
        }
        let i = a.partition_point(|&x| x <= z) - 1;
        let t = (z - a[i]) / (a[i + 1] - a[i]);
        b[i] + t * (b[i + 1] - b[i])
    }

    /// Rayleigh-like rescaling `(ref / λ)^4` relative to the reference band.
    pub fn scaled_to_wavelength(&self, wavelength_nm: f64, reference_nm: f64) -> Self {
        let s = (reference_nm / wavelength_nm).powi(4);
        AirProfile {
            altitudes_m: self.altitudes_m.clone(),
            beta_km: self.beta_km.iter().map(|b| b * s).collect(),
        }
    }
}

impl Default for AirProfile {
    fn default() -> Self {
        AirProfile::exponential(0.01, 8000.0)
    }
}
