//! Deterministic radiative transfer: discrete-ordinate successive orders of
//! scattering on the voxel grid, final-gather rendering and the sensor noise
//! operator.

mod noise;
mod ordinates;
mod render;
pub(crate) mod solver;
pub(crate) mod trace;

pub use noise::{apply_noise, apply_noise_with_scale, log_likelihood, pixel_likelihood};
pub use ordinates::Ordinates;
pub use render::{render, render_solution};
pub use solver::{solve_rt, RadianceField};
pub use trace::transmittance;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Reference wavelength for air extinction tables [nm].
pub const REFERENCE_WAVELENGTH_NM: f64 = 672.0;

/// Solver discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RTConfig {
    /// Highest scattering order K.
    pub max_order: usize,
    /// Gauss–Legendre nodes in cos(zenith).
    pub n_mu: usize,
    /// Uniform azimuth samples.
    pub n_phi: usize,
    /// Ray-march sub-step [m]; `None` means half the smallest voxel edge.
    pub step: Option<f64>,
    pub wavelength_nm: f64,
    /// Lambertian ground albedo.
    pub surface_albedo: f64,
}

impl Default for RTConfig {
    fn default() -> Self {
        RTConfig {
            max_order: 8,
            n_mu: 8,
            n_phi: 16,
            step: None,
            wavelength_nm: REFERENCE_WAVELENGTH_NM,
            surface_albedo: 0.0,
        }
    }
}

impl RTConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_order == 0 {
            return Err(invalid("scattering order cap must be >= 1"));
        }
        if self.n_mu == 0 || self.n_phi == 0 || self.n_mu * self.n_phi < 2 {
            return Err(invalid("need at least two discrete ordinates"));
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("march step must be positive"));
            }
        }
        if !(self.wavelength_nm > 0.0) {
            return Err(invalid("wavelength must be positive"));
        }
        if !(0.0..=1.0).contains(&self.surface_albedo) {
            return Err(invalid("surface albedo must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn step_for(&self, grid: &crate::scene::VoxelGrid) -> f64 {
        self.step.unwrap_or(0.5 * grid.min_edge())
    }
}
