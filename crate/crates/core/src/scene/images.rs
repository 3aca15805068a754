use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{CameraRig, SensorSpec};
use crate::error::{invalid, shape, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageUnits {
    /// W m⁻² sr⁻¹ nm⁻¹.
    Radiance,
    Graylevel,
}

/// One row-major image per camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSet {
    pub units: ImageUnits,
    pub widths: Vec<usize>,
    pub heights: Vec<usize>,
    pub data: Vec<Vec<f64>>,
    /// Expected photo-electrons per unit radiance used when the graylevels were
    /// produced; `None` for radiance images.
    pub electrons_per_radiance: Option<f64>,
}

impl ImageSet {
    pub fn new(
        units: ImageUnits,
        widths: Vec<usize>,
        heights: Vec<usize>,
        data: Vec<Vec<f64>>,
        electrons_per_radiance: Option<f64>,
    ) -> Result<Self> {
        let s = ImageSet {
            units,
            widths,
            heights,
            data,
            electrons_per_radiance,
        };
        s.validate()?;
        Ok(s)
    }

    /// All-zero radiance images shaped like the rig's sensors.
    pub fn zeros_like(rig: &CameraRig) -> Self {
        ImageSet {
            units: ImageUnits::Radiance,
            widths: rig.cameras.iter().map(|c| c.width).collect(),
            heights: rig.cameras.iter().map(|c| c.height).collect(),
            data: rig.cameras.iter().map(|c| alloc::vec![0.0; c.pixels()]).collect(),
            electrons_per_radiance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.data.len();
        if self.widths.len() != n || self.heights.len() != n {
            return Err(shape("image set dimension tables disagree"));
        }
        for (c, img) in self.data.iter().enumerate() {
            if img.len() != self.widths[c] * self.heights[c] {
                return Err(shape(format!("camera {c}: pixel count mismatch")));
            }
            if img.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("camera {c}: non-finite pixel")));
            }
        }
        Ok(())
    }

    /// Checks shapes against a rig, and graylevel range against a sensor.
    pub fn check_against(&self, rig: &CameraRig, sensor: Option<&SensorSpec>) -> Result<()> {
        self.validate()?;
        if self.data.len() != rig.cameras.len() {
            return Err(shape(format!(
                "{} images for {} cameras",
                self.data.len(),
                rig.cameras.len()
            )));
        }
        for (c, cam) in rig.cameras.iter().enumerate() {
            if self.widths[c] != cam.width || self.heights[c] != cam.height {
                return Err(shape(format!("camera {c}: image size differs from sensor")));
            }
        }
        if let (ImageUnits::Graylevel, Some(s)) = (self.units, sensor) {
            let top = s.max_graylevel();
            if self.data.iter().flatten().any(|&g| !(0.0..=top).contains(&g)) {
                return Err(invalid("graylevel outside the quantizer range"));
            }
        }
        Ok(())
    }

    pub fn cameras(&self) -> usize {
        self.data.len()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().flatten().cloned().fold(0.0, f64::max)
    }

    /// Images in the given camera order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&i) = idx.iter().find(|&&i| i >= self.data.len()) {
            return Err(invalid(format!("camera index {i} out of range")));
        }
        Ok(ImageSet {
            units: self.units,
            widths: idx.iter().map(|&i| self.widths[i]).collect(),
            heights: idx.iter().map(|&i| self.heights[i]).collect(),
            data: idx.iter().map(|&i| self.data[i].clone()).collect(),
            electrons_per_radiance: self.electrons_per_radiance,
        })
    }

    /// Graylevels mapped back to radiance through the recorded exposure
    /// (`gl · gain / electrons_per_radiance`). Radiance images are returned as is.
    pub fn to_radiance(&self, sensor: &SensorSpec) -> Result<Self> {
        match self.units {
            ImageUnits::Radiance => Ok(self.clone()),
            ImageUnits::Graylevel => {
                let e = self
                    .electrons_per_radiance
                    .filter(|e| *e > 0.0)
                    .ok_or_else(|| invalid("graylevel images lack an exposure scale"))?;
                let k = sensor.gain / e;
                Ok(ImageSet {
                    units: ImageUnits::Radiance,
                    widths: self.widths.clone(),
                    heights: self.heights.clone(),
                    data: self
                        .data
                        .iter()
                        .map(|img| img.iter().map(|g| g * k).collect())
                        .collect(),
                    electrons_per_radiance: None,
                })
            }
        }
    }
}
