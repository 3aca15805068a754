use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
use crate::scene::{ExtinctionField, VoxelGrid};
#[allow(unused_imports)]
use crate::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicrophysConstants {
    /// Droplet scattering efficiency.
    pub q_eff: f64,
    /// Density of liquid water [g/m³].
    pub rho_w: f64,
    /// Effective radius above which precipitation starts [µm].
    pub trigger_radius_um: f64,
    /// Minimal horizontal distance of a core voxel from the cloud edge [m].
    pub core_margin_m: f64,
}

impl Default for MicrophysConstants {
    fn default() -> Self {
        MicrophysConstants {
            q_eff: 2.0,
            rho_w: 1e6,
            trigger_radius_um: 14.0,
            core_margin_m: 100.0,
        }
    }
}

impl MicrophysConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_eff > 0.0 && self.rho_w > 0.0 && self.trigger_radius_um > 0.0 && self.core_margin_m >= 0.0) {
            return Err(invalid("microphysical constants must be positive"));
        }
        Ok(())
    }
}

/// Effective radius [µm] from extinction [km⁻¹] and LWC [g/m³].
pub fn effective_radius(beta_km: f64, lwc: f64, c: &MicrophysConstants) -> Result<f64> {
    if !(beta_km > 0.0) {
        return Err(invalid("effective radius is undefined where extinction vanishes"));
    }
    // r[m] = 3 Q LWC / (4 ρ β[m⁻¹]); β[m⁻¹] = β[km⁻¹]/1e3 and r[µm] = 1e6 r[m].
    Ok(3.0 * c.q_eff * lwc * 1e9 / (4.0 * c.rho_w * beta_km))
}

/// LWC [g/m³] from extinction [km⁻¹] and effective radius [µm].
pub fn lwc_from_re(beta_km: f64, re_um: f64, c: &MicrophysConstants) -> f64 {
    4.0 * c.rho_w * re_um * beta_km / (3.0 * c.q_eff * 1e9)
}

pub fn lwc_from_re_field(field: &ExtinctionField, re_um: &[f64], c: &MicrophysConstants) -> Result<Vec<f64>> {
    if re_um.len() != field.len() {
        return Err(shape("effective radius field does not match the grid"));
    }
    Ok(field.beta.iter().zip(re_um).map(|(b, r)| lwc_from_re(*b, *r, c)).collect())
}

/// Adiabatic liquid water content versus height above cloud base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum AdiabaticProfile {
    /// `LWC = c·Z` [g/m³ per m].
    Linear { c: f64 },
    /// Piecewise-linear table, clamped beyond its last node.
    Table { z_m: Vec<f64>, lwc: Vec<f64> },
}

impl Default for AdiabaticProfile {
    fn default() -> Self {
        AdiabaticProfile::Linear { c: 2e-3 }
    }
}

impl AdiabaticProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            AdiabaticProfile::Linear { c } => {
                if !(*c >= 0.0) {
                    return Err(invalid("adiabatic LWC slope must be >= 0"));
                }
            }
            AdiabaticProfile::Table { z_m, lwc } => {
                if z_m.is_empty() || z_m.len() != lwc.len() {
                    return Err(shape("adiabatic table needs matching non-empty columns"));
                }
                if z_m.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("adiabatic table heights must increase"));
                }
                if lwc.iter().any(|v| !(*v >= 0.0)) {
                    return Err(invalid("adiabatic LWC must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// LWC at height `z` above cloud base; zero below the base.
    pub fn lwc_at(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match self {
            AdiabaticProfile::Linear { c } => c * z,
            AdiabaticProfile::Table { z_m, lwc } => {
                if z <= z_m[0] {
                    // Linear from the base to the first node.
                    return if z_m[0] > 0.0 { lwc[0] * z / z_m[0] } else { lwc[0] };
                }
                if z >= z_m[z_m.len() - 1] {
                    return lwc[lwc.len() - 1];
                }
                let i = z_m.partition_point(|&x| x <= z) - 1;
                let t = (z - z_m[i]) / (z_m[i + 1] - z_m[i]);
                lwc[i] + t * (lwc[i + 1] - lwc[i])
            }
        }
    }
}

/// Cloud voxels at least `margin` horizontally from every empty voxel of
/// their own horizontal slab.
pub fn core_mask(field: &ExtinctionField, margin: f64) -> Vec<bool> {
    let g = &field.grid;
    let nxy = g.nx * g.ny;
    let mut out = vec![false; g.len()];
    let m2 = margin * margin;
    for k in 0..g.nz {
        let slab = &field.beta[k * nxy..(k + 1) * nxy];
        let empty: Vec<(f64, f64)> = (0..nxy)
            .filter(|&c| slab[c] <= 0.0)
            .map(|c| ((c % g.nx) as f64 * g.dx, (c / g.nx) as f64 * g.dy))
            .collect();
        for c in 0..nxy {
            if slab[c] <= 0.0 {
                continue;
            }
            let (x, y) = ((c % g.nx) as f64 * g.dx, (c / g.nx) as f64 * g.dy);
            out[k * nxy + c] = empty.iter().all(|(ex, ey)| (ex - x).powi(2) + (ey - y).powi(2) >= m2);
        }
    }
    out
}

/// Mean core effective radius at one altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreReSample {
    /// Altitude of the voxel layer [m].
    pub z: f64,
    pub re_um: f64,
    pub core_voxels: usize,
    /// Whether the radius exceeds the precipitation trigger.
    pub precipitating: bool,
}

/// Per-layer mean effective radius over core voxels, with the LWC taken from
/// the adiabatic profile at the layer height above `base_z`. Layers without
/// core voxels are omitted.
pub fn core_re_profile(
    field: &ExtinctionField,
    profile: &AdiabaticProfile,
    c: &MicrophysConstants,
    base_z: f64,
) -> Result<Vec<CoreReSample>> {
    profile.validate()?;
    c.validate()?;
    let g = &field.grid;
    let nxy = g.nx * g.ny;
    let core = core_mask(field, c.core_margin_m);
    let mut out = Vec::new();
    for k in 0..g.nz {
        let z = g.origin.z + (k as f64 + 0.5) * g.dz;
        let lwc = profile.lwc_at(z - base_z);
        let mut s = 0.0;
        let mut n = 0usize;
        for u in k * nxy..(k + 1) * nxy {
            if core[u] {
                s += effective_radius(field.beta[u], lwc, c)?;
                n += 1;
            }
        }
        if n > 0 {
            let re = s / n as f64;
            out.push(CoreReSample {
                z,
                re_um: re,
                core_voxels: n,
                precipitating: re > c.trigger_radius_um,
            });
        }
    }
    Ok(out)
}

/// Adiabatic fraction per voxel; `None` where the adiabatic LWC vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticFraction {
    pub values: Vec<Option<f64>>,
    /// Voxels with LWC above the adiabatic value.
    pub super_adiabatic: usize,
}

pub fn adiabatic_fraction(
    lwc: &[f64],
    grid: &VoxelGrid,
    profile: &AdiabaticProfile,
    base_z: f64,
) -> Result<AdiabaticFraction> {
    profile.validate()?;
    if lwc.len() != grid.len() {
        return Err(shape("LWC field does not match the grid"));
    }
    let mut sup = 0usize;
    let values = lwc
        .iter()
        .enumerate()
        .map(|(u, l)| {
            let ad = profile.lwc_at(grid.center_of(u).z - base_z);
            if ad > 0.0 {
                let af = l / ad;
                if af > 1.0 {
                    sup += 1;
                }
                Some(af)
            } else {
                None
            }
        })
        .collect();
    Ok(AdiabaticFraction {
        values,
        super_adiabatic: sup,
    })
}

/// One radial bin of the adiabatic-fraction histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AfBin {
    pub r_lo: f64,
    pub r_hi: f64,
    pub mean_af: f64,
    pub count: usize,
}

/// Mean AF of cloud voxels binned by horizontal distance from the cloud
/// centroid of their layer.
pub fn af_histogram(af: &AdiabaticFraction, field: &ExtinctionField, bin_m: f64, bins: usize) -> Result<Vec<AfBin>> {
    if af.values.len() != field.len() {
        return Err(shape("AF field does not match the grid"));
    }
    if !(bin_m > 0.0) || bins == 0 {
        return Err(invalid("histogram needs positive bin width and count"));
    }
    let g = &field.grid;
    let nxy = g.nx * g.ny;
    let mut sum = vec![0.0; bins];
    let mut cnt = vec![0usize; bins];
    for k in 0..g.nz {
        let cloud: Vec<usize> = (k * nxy..(k + 1) * nxy).filter(|&u| field.beta[u] > 0.0).collect();
        if cloud.is_empty() {
            continue;
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for &u in &cloud {
            let p = g.center_of(u);
            cx += p.x;
            cy += p.y;
        }
        cx /= cloud.len() as f64;
        cy /= cloud.len() as f64;
        for &u in &cloud {
            let Some(v) = af.values[u] else { continue };
            let p = g.center_of(u);
            let r = ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt();
            let b = (r / bin_m) as usize;
            if b < bins {
                sum[b] += v;
                cnt[b] += 1;
            }
        }
    }
    Ok((0..bins)
        .map(|b| AfBin {
            r_lo: b as f64 * bin_m,
            r_hi: (b + 1) as f64 * bin_m,
            mean_af: if cnt[b] > 0 { sum[b] / cnt[b] as f64 } else { 0.0 },
            count: cnt[b],
        })
        .collect())
}
