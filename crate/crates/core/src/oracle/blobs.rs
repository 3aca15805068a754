use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::Vec3;
use crate::rt::{apply_noise, render, RTConfig};
use crate::scene::{AirProfile, CameraRig, ExtinctionField, MediumOptics, SensorSpec, VoxelGrid};
use crate::training::LabeledScene;

/// Parameters of a procedural cloud class: the field is the pointwise
/// maximum of parabolic puffs, shaped by a vertical power profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobCloudClass {
    pub name: String,
    /// Inclusive range of puff counts.
    pub blobs: [usize; 2],
    /// Puff radius range [m].
    pub radius_m: [f64; 2],
    /// Puff peak extinction range [km⁻¹].
    pub peak_beta: [f64; 2],
    /// Exponent `p` of the height factor `((k + 1/2)/nz)^p`.
    pub vertical_exponent: f64,
    pub seed: u64,
}

impl Default for BlobCloudClass {
    fn default() -> Self {
        BlobCloudClass {
            name: String::from("cumulus"),
            blobs: [2, 5],
            radius_m: [60.0, 140.0],
            peak_beta: [20.0, 80.0],
            vertical_exponent: 0.5,
            seed: 0,
        }
    }
}

impl BlobCloudClass {
    pub fn validate(&self) -> Result<()> {
        if self.blobs[0] == 0 || self.blobs[1] < self.blobs[0] {
            return Err(invalid("blob count range must be non-empty and >= 1"));
        }
        if !(self.radius_m[0] > 0.0 && self.radius_m[1] >= self.radius_m[0]) {
            return Err(invalid("blob radius range must be positive"));
        }
        if !(self.peak_beta[0] >= 0.0 && self.peak_beta[1] >= self.peak_beta[0]) {
            return Err(invalid("peak extinction range must be non-negative"));
        }
        if !(self.vertical_exponent >= 0.0) {
            return Err(invalid("vertical exponent must be >= 0"));
        }
        Ok(())
    }
}

/// One procedural field drawn from `rng`.
pub fn blob_field<R: Rng + ?Sized>(class: &BlobCloudClass, grid: &VoxelGrid, rng: &mut R) -> Result<ExtinctionField> {
    class.validate()?;
    let n = rng.random_range(class.blobs[0]..=class.blobs[1]);
    let e = grid.extent();
    let puffs: Vec<(Vec3, f64, f64)> = (0..n)
        .map(|_| {
            let f = Vec3::new(rng.random_range(0.2..0.8), rng.random_range(0.2..0.8), rng.random_range(0.2..0.6));
            let c = grid.origin + Vec3::new(f.x * e.x, f.y * e.y, f.z * e.z);
            let r = rng.random_range(class.radius_m[0]..=class.radius_m[1]);
            let p = rng.random_range(class.peak_beta[0]..=class.peak_beta[1]);
            (c, r, p)
        })
        .collect();
    let beta = (0..grid.len())
        .map(|u| {
            let x = grid.center_of(u);
            let k = grid.unflat(u)[2];
            let h = ((k as f64 + 0.5) / grid.nz as f64).powf(class.vertical_exponent);
            let m = puffs.iter().fold(0.0f64, |m, (c, r, p)| {
                let d = (x - *c).norm() / r;
                m.max(p * (1.0 - d * d))
            });
            m.max(0.0) * h
        })
        .collect();
    ExtinctionField::new(grid.clone(), beta)
}

/// Cameras, sensor and physics used to image generated scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingSetup {
    pub rig: CameraRig,
    pub sensor: SensorSpec,
    pub optics: MediumOptics,
    pub air: AirProfile,
    pub rt: RTConfig,
}

/// `count` labeled scenes of a class, each rendered and noised. Scene `i`
/// depends only on the class seed and `i`.
pub fn gen_blob_class(class: &BlobCloudClass, count: usize, grid: &VoxelGrid, setup: &ImagingSetup) -> Result<Vec<LabeledScene>> {
    class.validate()?;
    let fields: Vec<ExtinctionField> = (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(class.seed);
            rng.set_stream(i as u64);
            blob_field(class, grid, &mut rng)
        })
        .collect::<Result<_>>()?;
    fields
        .into_iter()
        .enumerate()
        .map(|(i, field)| {
            let clean = render(&field, &setup.optics, &setup.air, &setup.rig, &setup.rt)?;
            let noise_seed = class.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64);
            let images = apply_noise(&clean, &setup.sensor, noise_seed)?;
            Ok(LabeledScene {
                field,
                images,
                rig: setup.rig.clone(),
                mask: None,
            })
        })
        .collect()
}
