use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::scene::{CameraRig, ImageSet, VoxelGrid};

/// Cloud-candidate mask: a voxel is kept when at least `agreement` cameras
/// (all in-frame cameras by default, capped at the in-frame count) see a
/// pixel brighter than `threshold` at the projection of its center. Voxels
/// outside every frame are dropped.
pub fn space_carve(
    images: &ImageSet,
    rig: &CameraRig,
    grid: &VoxelGrid,
    threshold: f64,
    agreement: Option<usize>,
) -> Result<Vec<bool>> {
    images.check_against(rig, None)?;
    if agreement == Some(0) {
        return Err(invalid("carve agreement must be >= 1"));
    }
    Ok((0..grid.len())
        .map(|u| {
            let x = grid.center_of(u);
            let (mut seen, mut bright) = (0usize, 0usize);
            for (c, cam) in rig.cameras.iter().enumerate() {
                let Ok(p) = cam.project(x) else { continue };
                if !cam.in_frame(p) {
                    continue;
                }
                seen += 1;
                let col = (p[0] as usize).min(cam.width - 1);
                let row = (p[1] as usize).min(cam.height - 1);
                if images.data[c][row * cam.width + col] > threshold {
                    bright += 1;
                }
            }
            let need = agreement.unwrap_or(seen).min(seen);
            seen > 0 && bright >= need
        })
        .collect())
}
