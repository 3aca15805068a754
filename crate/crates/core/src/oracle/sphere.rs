use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LogNormalPrior, Prior};
use crate::error::{invalid, Result};
use crate::math::Vec3;
use crate::probct::PosteriorGrid;
use crate::scene::{ExtinctionField, VoxelGrid};

/// Three concentric parts: a core and an outer shell with independent
/// log-normal extinctions, separated by an opaque intermediate shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphericalCloudSpec {
    pub center_km: [f64; 3],
    /// Outer radii of core, intermediate and outer parts [m].
    pub radii_m: [f64; 3],
    pub beta_inter: f64,
    pub prior: LogNormalPrior,
}

impl Default for SphericalCloudSpec {
    fn default() -> Self {
        SphericalCloudSpec {
            center_km: [0.8, 0.8, 1.28],
            radii_m: [60.0, 500.0, 600.0],
            beta_inter: 190.0,
            prior: LogNormalPrior::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shell {
    Core,
    Inter,
    Outer,
    Empty,
}

/// A drawn sphere with its per-voxel part labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalCloud {
    pub field: ExtinctionField,
    pub labels: Vec<Shell>,
    pub beta_core: f64,
    pub beta_outer: f64,
}

impl SphericalCloudSpec {
    pub fn validate(&self) -> Result<()> {
        let r = self.radii_m;
        if !(r[0] > 0.0 && r[1] > r[0] && r[2] > r[1]) {
            return Err(invalid("shell radii must be positive and strictly increasing"));
        }
        if !(self.beta_inter >= 0.0) {
            return Err(invalid("intermediate extinction must be >= 0"));
        }
        self.prior.validate()
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center_km) * 1000.0
    }

    /// 32³ grid of 40 m voxels holding the default sphere.
    pub fn default_grid() -> VoxelGrid {
        VoxelGrid::cube(32, 40.0, Vec3::new(160.0, 160.0, 640.0)).expect("valid constant grid")
    }

    pub fn shell_of(&self, x: Vec3) -> Shell {
        let d = (x - self.center()).norm();
        let r = self.radii_m;
        if d <= r[0] {
            Shell::Core
        } else if d <= r[1] {
            Shell::Inter
        } else if d <= r[2] {
            Shell::Outer
        } else {
            Shell::Empty
        }
    }
}

/// Assigns each voxel by the distance of its center from the sphere center.
pub fn make_spherical_cloud(spec: &SphericalCloudSpec, seed: u64, grid: &VoxelGrid) -> Result<SphericalCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta_core = spec.prior.sample(&mut rng);
    let beta_outer = spec.prior.sample(&mut rng);
    let labels: Vec<Shell> = (0..grid.len()).map(|u| spec.shell_of(grid.center_of(u))).collect();
    let beta = labels
        .iter()
        .map(|l| match l {
            Shell::Core => beta_core,
            Shell::Inter => spec.beta_inter,
            Shell::Outer => beta_outer,
            Shell::Empty => 0.0,
        })
        .collect();
    Ok(SphericalCloud {
        field: ExtinctionField::new(grid.clone(), beta)?,
        labels,
        beta_core,
        beta_outer,
    })
}

/// Mean posterior over the voxels of one part.
pub fn shell_average_posterior(pg: &PosteriorGrid, labels: &[Shell], shell: Shell) -> Result<Vec<f64>> {
    if labels.len() != pg.grid.len() {
        return Err(invalid("label grid differs from the posterior grid"));
    }
    let mut acc = vec![0.0; pg.spec.q];
    let mut n = 0usize;
    for (u, l) in labels.iter().enumerate() {
        if *l == shell {
            for (a, p) in acc.iter_mut().zip(pg.distribution(u)) {
                *a += p;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(invalid("the requested part contains no voxels"));
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Ok(acc)
}
