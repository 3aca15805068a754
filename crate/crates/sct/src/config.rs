//! The run configuration: one JSON document, every field optional, unknown
//! keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sct_core::adjoint::PhysicsOptions;
use sct_core::math::Vec3;
use sct_core::oracle::{BimodalPrior, BlobCloudClass, ImagingSetup};
use sct_core::probct::{PosteriorSpec, ProbCtConfig};
use sct_core::products::{AdiabaticProfile, HemisphereQuadrature, MicrophysConstants, PVSpec};
use sct_core::rt::RTConfig;
use sct_core::scene::{AirProfile, Camera, CameraRig, MediumOptics, SensorSpec, VoxelGrid};
use sct_core::training::TrainConfig;

use crate::error::{io_err, CliError, Result};

/// Cameras on a ring above the domain, all aimed at its center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigConfig {
    pub cameras: usize,
    /// Horizontal distance from the domain center [m].
    pub radius_m: f64,
    /// Height above the domain center [m].
    pub height_m: f64,
    pub fov_deg: f64,
    pub pixels: usize,
    pub sun_zenith_deg: f64,
    pub sun_azimuth_deg: f64,
    pub irradiance: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig {
            cameras: 10,
            radius_m: 600.0,
            height_m: 400.0,
            fov_deg: 50.0,
            pixels: 16,
            sun_zenith_deg: 30.0,
            sun_azimuth_deg: 0.0,
            irradiance: 1.0,
        }
    }
}

impl RigConfig {
    pub fn build(&self, grid: &VoxelGrid) -> Result<CameraRig> {
        if self.cameras == 0 {
            return Err(CliError::Config("rig needs at least one camera".into()));
        }
        let c = grid.center();
        let up = Vec3::new(0.0, 0.0, 1.0);
        let cams = (0..self.cameras)
            .map(|k| {
                let a = k as f64 * 2.0 * std::f64::consts::PI / self.cameras as f64;
                let pos = c + Vec3::new(self.radius_m * a.cos(), self.radius_m * a.sin(), self.height_m);
                Camera::look_at(pos, c, up, self.fov_deg, self.pixels, self.pixels)
            })
            .collect::<sct_core::Result<Vec<_>>>()?;
        Ok(CameraRig::new(
            cams,
            CameraRig::sun_from_angles(self.sun_zenith_deg, self.sun_azimuth_deg),
            self.irradiance,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub grid: VoxelGrid,
    pub rig: RigConfig,
    pub sensor: SensorSpec,
    pub optics: MediumOptics,
    pub air: AirProfile,
    /// Procedural cloud classes addressable by name.
    pub classes: Vec<BlobCloudClass>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let ood = BlobCloudClass {
            name: "cumulus-dense".into(),
            peak_beta: [60.0, 140.0],
            seed: 1,
            ..BlobCloudClass::default()
        };
        SceneConfig {
            grid: VoxelGrid {
                nx: 12,
                ny: 12,
                nz: 12,
                dx: 40.0,
                dy: 40.0,
                dz: 40.0,
                origin: Vec3::new(0.0, 0.0, 500.0),
            },
            rig: RigConfig::default(),
            sensor: SensorSpec::default(),
            optics: MediumOptics::default(),
            air: AirProfile::default(),
            classes: vec![BlobCloudClass::default(), ood],
        }
    }
}

impl SceneConfig {
    pub fn class(&self, name: &str) -> Result<&BlobCloudClass> {
        self.classes.iter().find(|c| c.name == name).ok_or_else(|| {
            let known: Vec<&str> = self.classes.iter().map(|c| c.name.as_str()).collect();
            CliError::Usage(format!("unknown cloud class {name:?}; known: {}", known.join(", ")))
        })
    }
}

/// Network shape; the bin layout comes from the `posterior` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder_width: usize,
    pub encoder_layers: usize,
    pub pyramid_channels: [usize; 3],
    pub feature_channels: usize,
    pub decoder_width: usize,
    pub decoder_layers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let d = ProbCtConfig::default();
        ModelConfig {
            encoder_width: d.encoder_width,
            encoder_layers: d.encoder_layers,
            pyramid_channels: d.pyramid_channels,
            feature_channels: d.feature_channels,
            decoder_width: 256,
            decoder_layers: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProductsConfig {
    pub pv: PVSpec,
    pub microphysics: MicrophysConstants,
    pub adiabatic: AdiabaticProfile,
    pub quadrature: HemisphereQuadrature,
    /// Cloud base altitude [m]; `None` takes the bottom of the lowest cloudy layer.
    pub cloud_base_m: Option<f64>,
    /// Radial bin width of the adiabatic-fraction histogram [m].
    pub af_bin_m: f64,
    pub af_bins: usize,
    /// Extinction above which a voxel counts as cloud [km⁻¹].
    pub cloud_threshold: f64,
}

impl Default for ProductsConfig {
    fn default() -> Self {
        ProductsConfig {
            pv: PVSpec::default(),
            microphysics: MicrophysConstants::default(),
            adiabatic: AdiabaticProfile::default(),
            quadrature: HemisphereQuadrature::default(),
            cloud_base_m: None,
            af_bin_m: 40.0,
            af_bins: 8,
            cloud_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub prior: BimodalPrior,
    /// Prior density below which hypotheses are skipped.
    pub prior_cutoff: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            prior: BimodalPrior::default(),
            prior_cutoff: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub rt: RTConfig,
    pub train: TrainConfig,
    pub posterior: PosteriorSpec,
    pub model: ModelConfig,
    pub physics: PhysicsOptions,
    pub products: ProductsConfig,
    pub oracle: OracleConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.grid.validate()?;
        self.scene.sensor.validate()?;
        self.scene.optics.validate()?;
        self.scene.air.validate()?;
        for c in &self.scene.classes {
            c.validate()?;
        }
        self.rt.validate()?;
        self.train.validate()?;
        self.model_config().validate()?;
        self.products.pv.validate()?;
        self.oracle.prior.validate()?;
        if !(self.products.af_bin_m > 0.0) || self.products.af_bins == 0 {
            return Err(CliError::Config("histogram needs positive bin width and count".into()));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ProbCtConfig {
        let m = &self.model;
        ProbCtConfig {
            posterior: self.posterior,
            encoder_width: m.encoder_width,
            encoder_layers: m.encoder_layers,
            pyramid_channels: m.pyramid_channels,
            feature_channels: m.feature_channels,
            decoder_width: m.decoder_width,
            decoder_layers: m.decoder_layers,
        }
    }

    pub fn imaging(&self, rig: CameraRig) -> ImagingSetup {
        ImagingSetup {
            rig,
            sensor: self.scene.sensor,
            optics: self.scene.optics,
            air: self.scene.air.clone(),
            rt: self.rt.clone(),
        }
    }
}
