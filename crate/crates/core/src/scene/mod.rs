//! Domain geometry, media, cameras and sensor description.

mod air;
mod camera;
mod field;
mod grid;
mod images;
mod optics;
mod sensor;

pub use air::AirProfile;
pub use camera::{Camera, CameraRig};
pub use field::ExtinctionField;
pub use grid::{VoxelGrid, VoxelIndex};
pub use images::{ImageSet, ImageUnits};
pub use optics::{henyey_greenstein, MediumOptics, PhaseParams};
pub use sensor::SensorSpec;
