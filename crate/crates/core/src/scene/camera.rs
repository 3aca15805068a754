use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::Vec3;
#[allow(unused_imports)]
use crate::prelude::*;

/// Pinhole camera. `orientation` rows are the image right axis, image down
/// axis and the optical axis, in world coordinates. Pixel `(col, row)` covers
/// `[col, col+1) x [row, row+1)` in continuous image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub center: Vec3,
    pub orientation: [Vec3; 3],
    pub focal: f64,
    pub principal: [f64; 2],
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(
        center: Vec3,
        orientation: [Vec3; 3],
        focal: f64,
        principal: [f64; 2],
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let c = Camera {
            center,
            orientation,
            focal,
            principal,
            width,
            height,
        };
        c.validate()?;
        Ok(c)
    }

    /// Camera at `center` aimed at `target`, with image "up" closest to `up`
    /// and a horizontal field of view `fov_deg`.
    pub fn look_at(
        center: Vec3,
        target: Vec3,
        up: Vec3,
        fov_deg: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let fwd = (target - center).normalized();
        let mut right = fwd.cross(up);
        if !(right.norm() > 1e-9) {
            // Looking along `up`: pick any perpendicular axis.
            let alt = if fwd.x.abs() < 0.9 {
                Vec3::new(1.0, 0.0, 0.0)
            } else {
                Vec3::new(0.0, 1.0, 0.0)
            };
            right = fwd.cross(alt);
        }
        let right = right.normalized();
        let down = fwd.cross(right).normalized();
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(invalid("field of view must lie in (0, 180) degrees"));
        }
        let focal = 0.5 * width as f64 / (0.5 * fov_deg.to_radians()).tan();
        Camera::new(
            center,
            [right, down, fwd],
            focal,
            [0.5 * width as f64, 0.5 * height as f64],
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(invalid("camera resolution must be >= 1"));
        }
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(invalid("focal length must be positive"));
        }
        let o = &self.orientation;
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                if (o[a].dot(o[b]) - want).abs() > 1e-10 {
                    return Err(invalid(format!(
                        "camera orientation is not orthonormal (row {a} . row {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn forward(&self) -> Vec3 {
        self.orientation[2]
    }

    /// Continuous image coordinates of a world point.
    pub fn project(&self, x: Vec3) -> Result<[f64; 2]> {
        let d = x - self.center;
        let z = d.dot(self.orientation[2]);
        if !(z > 0.0) {
            return Err(Error::BehindCamera { depth: z });
        }
        let u = self.principal[0] + self.focal * d.dot(self.orientation[0]) / z;
        let v = self.principal[1] + self.focal * d.dot(self.orientation[1]) / z;
        Ok([u, v])
    }

    /// Whether continuous image coordinates fall on the sensor.
    pub fn in_frame(&self, p: [f64; 2]) -> bool {
        p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= self.width as f64 && p[1] <= self.height as f64
    }

    /// Unit viewing direction through continuous image coordinates `p`.
    pub fn pixel_ray(&self, p: [f64; 2]) -> Result<Vec3> {
        if !self.in_frame(p) || !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::PixelOutOfBounds {
                x: p[0],
                y: p[1],
                width: self.width,
                height: self.height,
            });
        }
        let a = (p[0] - self.principal[0]) / self.focal;
        let b = (p[1] - self.principal[1]) / self.focal;
        Ok((self.orientation[0] * a + self.orientation[1] * b + self.orientation[2]).normalized())
    }

    /// Viewing direction through the center of pixel `(col, row)`.
    pub fn pixel_center_ray(&self, col: usize, row: usize) -> Result<Vec3> {
        self.pixel_ray([col as f64 + 0.5, row as f64 + 0.5])
    }
}

/// Ordered cameras plus the solar boundary condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub cameras: Vec<Camera>,
    /// Propagation direction of the direct solar beam (pointing downward).
    pub sun_direction: Vec3,
    /// Solar spectral irradiance at the domain top [W m⁻² nm⁻¹].
    pub irradiance: f64,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>, sun_direction: Vec3, irradiance: f64) -> Result<Self> {
        let r = CameraRig {
            cameras,
            sun_direction,
            irradiance,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(invalid("camera rig needs at least one camera"));
        }
        for c in &self.cameras {
            c.validate()?;
        }
        if (self.sun_direction.norm() - 1.0).abs() > 1e-9 {
            return Err(invalid("solar direction must be a unit vector"));
        }
        if !(self.irradiance > 0.0 && self.irradiance.is_finite()) {
            return Err(invalid("solar irradiance must be positive"));
        }
        Ok(())
    }

    /// Downward propagation direction for a sun at zenith angle `zenith_deg`
    /// and azimuth `azimuth_deg` (direction towards the sun).
    pub fn sun_from_angles(zenith_deg: f64, azimuth_deg: f64) -> Vec3 {
        let (t, p) = (zenith_deg.to_radians(), azimuth_deg.to_radians());
        -Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    /// Same sun, a subset of cameras in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let cams = idx
            .iter()
            .map(|&i| {
                self.cameras
                    .get(i)
                    .cloned()
                    .ok_or_else(|| invalid(format!("camera index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        CameraRig::new(cams, self.sun_direction, self.irradiance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cam() -> Camera {
        Camera::look_at(
            Vec3::new(100.0, -400.0, 900.0),
            Vec3::new(80.0, 60.0, 40.0),
            Vec3::new(0.0, 0.0, 1.0),
            50.0,
            32,
            24,
        )
        .unwrap()
    }

    #[test]
    fn axis_point_projects_to_principal_point() {
        let c = cam();
        let p = c.project(c.center + c.forward() * 500.0).unwrap();
        assert!((p[0] - c.principal[0]).abs() < 1e-9 && (p[1] - c.principal[1]).abs() < 1e-9);
        let r = c.pixel_ray(c.principal).unwrap();
        assert!((r - c.forward()).norm() < 1e-12);
    }

    #[test]
    fn lateral_offset_follows_similar_triangles() {
        let c = cam();
        let (d, z) = (3.0, 250.0);
        let x = c.center + c.forward() * z + c.orientation[0] * d;
        let p = c.project(x).unwrap();
        assert!((p[0] - c.principal[0] - c.focal * d / z).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_is_an_error() {
        let c = cam();
        assert!(matches!(
            c.project(c.center - c.forward()),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn out_of_bounds_pixel_is_an_error() {
        let c = cam();
        assert!(c.pixel_ray([-0.1, 3.0]).is_err());
        assert!(c.pixel_ray([3.0, 24.5]).is_err());
        let corner = c.pixel_ray([0.0, 0.0]).unwrap();
        assert!((corner.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_orthonormal_orientation() {
        let mut c = cam();
        c.orientation[0] = c.orientation[0] * 1.001;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn ray_round_trip(u in 0.0f64..32.0, v in 0.0f64..24.0, t in 1.0f64..5000.0) {
            let c = cam();
            let w = c.pixel_ray([u, v]).unwrap();
            prop_assert!((w.norm() - 1.0).abs() < 1e-12);
            let p = c.project(c.center + w * t).unwrap();
            prop_assert!((p[0] - u).abs() < 1e-6 && (p[1] - v).abs() < 1e-6);
        }
    }
}
