//! Reproducible studies behind the acceptance suite.

pub mod blobs;
pub mod single_voxel;
pub mod spheres;
