//! Ground truth for verification: priors, brute-force single-voxel Bayes
//! posteriors, the concentric-sphere scene and a procedural cloud generator.

mod bayes;
mod blobs;
mod priors;
mod sphere;

pub use bayes::{bayes_posterior, beta_grid, density_to_bins, kl_divergence, BayesOracle};
pub use blobs::{blob_field, gen_blob_class, BlobCloudClass, ImagingSetup};
pub use priors::{BimodalPrior, LogNormalPrior, Prior};
pub use sphere::{make_spherical_cloud, shell_average_posterior, Shell, SphericalCloud, SphericalCloudSpec};
