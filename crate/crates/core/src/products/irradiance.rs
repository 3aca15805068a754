use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fresnel::cover_transmissivity;
use crate::error::{invalid, shape, Result};
use crate::math::{gauss_legendre, Vec3, PI};
use crate::par;
use crate::rt::solver::{solve, Mode};
use crate::rt::{transmittance, RTConfig};
use crate::scene::{AirProfile, CameraRig, ExtinctionField, MediumOptics};
#[allow(unused_imports)]
use crate::prelude::*;

/// Gauss–Legendre in `cos Ψ` over `(0, 1]` times uniform azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HemisphereQuadrature {
    pub n_mu: usize,
    pub n_phi: usize,
}

impl Default for HemisphereQuadrature {
    fn default() -> Self {
        HemisphereQuadrature { n_mu: 32, n_phi: 64 }
    }
}

impl HemisphereQuadrature {
    pub fn validate(&self) -> Result<()> {
        if self.n_mu == 0 || self.n_phi == 0 {
            return Err(invalid("hemisphere quadrature needs at least one node per axis"));
        }
        Ok(())
    }

    /// Downward propagation directions with weights `w·cos Ψ`, so that the
    /// weights alone integrate `cos Ψ dω` to π.
    pub fn nodes(&self) -> Vec<(Vec3, f64)> {
        let (x, w) = gauss_legendre(self.n_mu);
        let dphi = 2.0 * PI / self.n_phi as f64;
        let mut out = Vec::with_capacity(self.n_mu * self.n_phi);
        for (xi, wi) in x.iter().zip(&w) {
            let mu = 0.5 * (xi + 1.0);
            let s = (1.0 - mu * mu).max(0.0).sqrt();
            for j in 0..self.n_phi {
                let phi = (j as f64 + 0.5) * dphi;
                let omega = Vec3::new(s * phi.cos(), s * phi.sin(), -mu);
                out.push((omega, 0.5 * wi * dphi * mu));
            }
        }
        out
    }
}

/// Attenuated direct solar beam at a ground point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectBeam {
    /// Propagation direction (downward).
    pub direction: Vec3,
    /// Irradiance on a plane normal to the beam.
    pub normal_irradiance: f64,
}

/// Global horizontal irradiance from diffuse radiance `radiance(ω)` (ω the
/// downward propagation direction) plus an optional direct beam. With
/// `cover_index` set, each direction is weighted by the cover transmissivity.
pub fn ghi(
    radiance: &dyn Fn(Vec3) -> f64,
    direct: Option<DirectBeam>,
    cover_index: Option<f64>,
    quad: &HemisphereQuadrature,
) -> f64 {
    let t = |w: Vec3| cover_index.map_or(1.0, |n| cover_transmissivity(w, n));
    let diffuse: f64 = quad.nodes().into_iter().map(|(w, q)| q * radiance(w) * t(w)).sum();
    let beam = direct.map_or(0.0, |b| {
        let d = b.direction.normalized();
        if d.z < 0.0 {
            b.normal_irradiance * -d.z * t(d)
        } else {
            0.0
        }
    });
    diffuse + beam
}

/// Solar spectral irradiance scale, cover index and spectral response of a
/// horizontal panel, sampled on a few narrow bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PVSpec {
    pub refractive_index: f64,
    pub wavelengths_nm: Vec<f64>,
    pub bandwidth_nm: f64,
    /// Spectral response [A/W], one value per band.
    pub response: Vec<f64>,
    /// Top-of-domain solar irradiance [W m⁻² nm⁻¹], one value per band.
    pub solar_irradiance: Vec<f64>,
}

impl Default for PVSpec {
    fn default() -> Self {
        PVSpec {
            refractive_index: 1.5,
            wavelengths_nm: vec![460.0, 560.0, 660.0, 860.0, 1060.0],
            bandwidth_nm: 20.0,
            // Crystalline silicon, normalized to its peak.
            response: vec![0.42, 0.58, 0.71, 0.93, 0.55],
            solar_irradiance: vec![2.0, 1.85, 1.55, 0.98, 0.68],
        }
    }
}

impl PVSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.refractive_index > 1.0) {
            return Err(invalid("cover refractive index must exceed 1"));
        }
        let n = self.wavelengths_nm.len();
        if n == 0 || self.response.len() != n || self.solar_irradiance.len() != n {
            return Err(shape("band tables must be non-empty and of equal length"));
        }
        if self.wavelengths_nm.iter().any(|w| !(*w > 0.0)) || !(self.bandwidth_nm > 0.0) {
            return Err(invalid("wavelengths and bandwidth must be positive"));
        }
        if self.response.iter().chain(&self.solar_irradiance).any(|v| !(*v >= 0.0)) {
            return Err(invalid("spectral response and irradiance must be >= 0"));
        }
        Ok(())
    }

    /// Spec restricted to one band.
    pub fn band(&self, b: usize) -> PVSpec {
        PVSpec {
            refractive_index: self.refractive_index,
            wavelengths_nm: vec![self.wavelengths_nm[b]],
            bandwidth_nm: self.bandwidth_nm,
            response: vec![self.response[b]],
            solar_irradiance: vec![self.solar_irradiance[b]],
        }
    }
}

/// GHI at ground points for one wavelength, with the solar irradiance taken
/// from `rig`. Radiance comes from a full solve of the scene.
#[allow(clippy::too_many_arguments)]
pub fn ghi_at_points(
    field: &ExtinctionField,
    points: &[Vec3],
    rig: &CameraRig,
    optics: &MediumOptics,
    air: &AirProfile,
    cfg: &RTConfig,
    cover_index: Option<f64>,
    quad: &HemisphereQuadrature,
) -> Result<Vec<f64>> {
    quad.validate()?;
    let sol = solve(
        field,
        optics,
        air,
        rig,
        cfg,
        Mode {
            full: false,
            all_voxels: false,
        },
    )?;
    let reach = 2.0 * field.grid.extent().norm();
    Ok(par::map(points.len(), |i| {
        let x = points[i];
        let sun = rig.sun_direction;
        let far = x - sun * (reach + (x - field.grid.center()).norm());
        let t = transmittance(field, optics, air, cfg.wavelength_nm, x, far);
        let beam = DirectBeam {
            direction: sun,
            normal_irradiance: rig.irradiance * t,
        };
        ghi(&|w| sol.radiance_at(x, w), Some(beam), cover_index, quad)
    }))
}

/// Photocurrent density `Σ_λ SR_λ · G̃HI_λ · Δλ` at ground points; one solve
/// per band with the air extinction rescaled to that band.
#[allow(clippy::too_many_arguments)]
pub fn pv_current(
    field: &ExtinctionField,
    points: &[Vec3],
    rig: &CameraRig,
    optics: &MediumOptics,
    air: &AirProfile,
    pv: &PVSpec,
    cfg: &RTConfig,
    quad: &HemisphereQuadrature,
) -> Result<Vec<f64>> {
    pv.validate()?;
    let mut total = vec![0.0; points.len()];
    for b in 0..pv.wavelengths_nm.len() {
        let band_cfg = RTConfig {
            wavelength_nm: pv.wavelengths_nm[b],
            ..cfg.clone()
        };
        if pv.solar_irradiance[b] == 0.0 || pv.response[b] == 0.0 {
            continue;
        }
        let band_rig = CameraRig {
            irradiance: pv.solar_irradiance[b],
            ..rig.clone()
        };
        let g = ghi_at_points(field, points, &band_rig, optics, air, &band_cfg, Some(pv.refractive_index), quad)?;
        for (t, v) in total.iter_mut().zip(g) {
            *t += pv.response[b] * v * pv.bandwidth_nm;
        }
    }
    Ok(total)
}

/// `(i₊ − i₋) / i₀`; zero when `i₀` vanishes.
pub fn relative_response(i_plus: f64, i_minus: f64, i0: f64) -> f64 {
    if i0 == 0.0 {
        0.0
    } else {
        (i_plus - i_minus) / i0
    }
}

/// Relative photocurrent change between the estimate shifted up and down by
/// one posterior standard deviation (the lower field clamped at 0).
#[allow(clippy::too_many_arguments)]
pub fn pv_relative_response(
    estimate: &ExtinctionField,
    std: &[f64],
    points: &[Vec3],
    rig: &CameraRig,
    optics: &MediumOptics,
    air: &AirProfile,
    pv: &PVSpec,
    cfg: &RTConfig,
    quad: &HemisphereQuadrature,
) -> Result<Vec<f64>> {
    if std.len() != estimate.len() {
        return Err(shape("posterior STD does not match the estimate grid"));
    }
    if std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(invalid("posterior STD must be finite and >= 0"));
    }
    let shifted = |sign: f64| -> Result<ExtinctionField> {
        estimate.with_values(estimate.beta.iter().zip(std).map(|(b, s)| (b + sign * s).max(0.0)).collect())
    };
    let run = |f: &ExtinctionField| pv_current(f, points, rig, optics, air, pv, cfg, quad);
    if std.iter().all(|s| *s == 0.0) {
        return Ok(vec![0.0; points.len()]);
    }
    let i0 = run(estimate)?;
    let ip = run(&shifted(1.0)?)?;
    let im = run(&shifted(-1.0)?)?;
    Ok(i0.iter().zip(ip.iter().zip(&im)).map(|(z, (p, m))| relative_response(*p, *m, *z)).collect())
}
