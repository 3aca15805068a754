//! Per-voxel posterior neural field: coordinate encoders, an image feature
//! pyramid sampled at voxel projections, and a decoder emitting a discrete
//! distribution over extinction bins.

mod model;
mod posterior;

use alloc::vec::Vec;

pub use model::{bilinear_taps, normalized_pixels, sample_features, ProbCt, ProbCtConfig};
pub(crate) use model::Pyramid;
pub use posterior::{
    map_estimate, mean_estimate, normalized_entropy, posterior_std, smoothmax_estimate, PosteriorGrid,
    PosteriorSpec,
};

use crate::error::{shape, Result};
use crate::scene::{CameraRig, ImageSet, SensorSpec, VoxelGrid};

/// Smoothmax amplification used for differentiable point estimates.
pub const SMOOTHMAX_ALPHA: f64 = 10.0;

/// Posterior for every voxel flagged in `mask`; the rest keep the delta at
/// bin 0.
pub fn infer_scene(
    model: &ProbCt,
    images: &ImageSet,
    rig: &CameraRig,
    grid: &VoxelGrid,
    mask: &[bool],
    sensor: &SensorSpec,
) -> Result<PosteriorGrid> {
    if mask.len() != grid.len() {
        return Err(shape("mask size differs from the grid"));
    }
    let voxels: Vec<usize> = (0..grid.len()).filter(|&u| mask[u]).collect();
    if voxels.is_empty() {
        return Ok(PosteriorGrid::empty(model.cfg.posterior, grid.clone()));
    }
    let probs = model.posteriors(images, rig, grid, sensor, &voxels)?;
    PosteriorGrid::new(
        model.cfg.posterior,
        grid.clone(),
        voxels.into_iter().map(|u| u as u32).collect(),
        probs,
    )
}
