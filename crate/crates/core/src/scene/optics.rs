use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::FOUR_PI;
#[allow(unused_imports)]
use crate::prelude::*;

/// Henyey–Greenstein phase function normalized so that
/// `(1/4π) ∮ p(cosθ) dω = 1`.
#[inline]
pub fn henyey_greenstein(g: f64, cos_theta: f64) -> f64 {
    let d = 1.0 + g * g - 2.0 * g * cos_theta;
    (1.0 - g * g) / (d * d.sqrt())
}

/// Single-scattering albedo and HG asymmetry for one scattering component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub albedo: f64,
    pub g: f64,
}

impl PhaseParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(invalid("single-scattering albedo must lie in [0, 1]"));
        }
        if !(self.g.abs() < 1.0) {
            return Err(invalid("asymmetry parameter must satisfy |g| < 1"));
        }
        Ok(())
    }

    pub fn phase(&self, cos_theta: f64) -> f64 {
        henyey_greenstein(self.g, cos_theta)
    }

    /// Phase function already divided by 4π.
    pub fn phase_4pi(&self, cos_theta: f64) -> f64 {
        self.phase(cos_theta) / FOUR_PI
    }
}

/// Optical properties of cloud droplets and air molecules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumOptics {
    pub cloud: PhaseParams,
    pub air: PhaseParams,
}

impl MediumOptics {
    pub fn new(cloud: PhaseParams, air: PhaseParams) -> Result<Self> {
        let m = MediumOptics { cloud, air };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.cloud.validate()?;
        self.air.validate()
    }
}

impl Default for MediumOptics {
    fn default() -> Self {
        MediumOptics {
            cloud: PhaseParams {
                albedo: 1.0,
                g: 0.85,
            },
            air: PhaseParams { albedo: 1.0, g: 0.0 },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{gauss_legendre, PI};

    #[test]
    fn hg_is_normalized_on_the_sphere() {
        // (1/4π) ∮ p dω = (1/2) ∫_{-1}^{1} p(μ) dμ; the forward peak needs many nodes.
        let (x, w) = gauss_legendre(400);
        for g in [-0.5, 0.0, 0.5, 0.85] {
            let s: f64 = x.iter().zip(&w).map(|(m, wi)| wi * henyey_greenstein(g, *m)).sum();
            let norm = 2.0 * PI * s / (4.0 * PI);
            assert!((norm - 1.0).abs() < 1e-6, "g={g}: {norm}");
        }
    }

    #[test]
    fn isotropic_when_g_is_zero() {
        assert!((henyey_greenstein(0.0, 0.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validates_ranges() {
        assert!(PhaseParams { albedo: 1.1, g: 0.0 }.validate().is_err());
        assert!(PhaseParams { albedo: 0.5, g: 1.0 }.validate().is_err());
        assert!(MediumOptics::default().validate().is_ok());
    }
}
