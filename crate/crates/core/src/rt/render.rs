use alloc::vec::Vec;

use super::solver::{solve, Gather, Mode, RadianceField};
use super::trace::march;
use super::RTConfig;
use crate::error::Result;
use crate::par;
use crate::scene::{AirProfile, Camera, CameraRig, ExtinctionField, ImageSet, ImageUnits, MediumOptics};

/// Noiseless radiance images of every camera in the rig.
pub fn render(
    field: &ExtinctionField,
    optics: &MediumOptics,
    air: &AirProfile,
    rig: &CameraRig,
    cfg: &RTConfig,
) -> Result<ImageSet> {
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
    render_solution(&sol, rig)
}

/// Renders the cameras of `rig` from an already solved field.
pub fn render_solution(sol: &RadianceField, rig: &CameraRig) -> Result<ImageSet> {
    rig.validate()?;
    let mut data = Vec::with_capacity(rig.len());
    for cam in &rig.cameras {
        data.push(par::map(cam.pixels(), |p| pixel(sol, cam, p)));
    }
    ImageSet::new(
        ImageUnits::Radiance,
        rig.cameras.iter().map(|c| c.width).collect(),
        rig.cameras.iter().map(|c| c.height).collect(),
        data,
        None,
    )
}

pub(crate) fn pixel(sol: &RadianceField, cam: &Camera, p: usize) -> f64 {
    let s = &sol.setup;
    let view = cam
        .pixel_center_ray(p % cam.width, p / cam.width)
        .expect("pixel centers lie on the sensor");
    let q = Gather::new(s, -view);
    march(
        &s.med,
        s.step,
        cam.center,
        view,
        true,
        |u, x| q.emission(sol, u, x),
        |e| s.ground_value(&sol.reflect_total, e),
        None,
    )
    .0
}
