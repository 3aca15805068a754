use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::VoxelGrid;
use crate::error::{invalid, shape, Result};

/// Per-voxel extinction coefficient in km⁻¹ on a [`VoxelGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionField {
    pub grid: VoxelGrid,
    pub beta: Vec<f64>,
}

impl ExtinctionField {
    pub fn new(grid: VoxelGrid, beta: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if beta.len() != grid.len() {
            return Err(shape(format!(
                "field has {} values for a grid of {} voxels",
                beta.len(),
                grid.len()
            )));
        }
        if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(invalid(format!("extinction must be finite and >= 0, got {b}")));
        }
        Ok(ExtinctionField { grid, beta })
    }

    pub fn zeros(grid: VoxelGrid) -> Self {
        let n = grid.len();
        ExtinctionField {
            grid,
            beta: vec![0.0; n],
        }
    }

    pub fn uniform(grid: VoxelGrid, value: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n])
    }

    pub fn from_fn(grid: VoxelGrid, mut f: impl FnMut(crate::math::Vec3) -> f64) -> Result<Self> {
        let beta = (0..grid.len()).map(|i| f(grid.center_of(i))).collect();
        Self::new(grid, beta)
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.beta.iter().cloned().fold(0.0, f64::max)
    }

    pub fn l1(&self) -> f64 {
        self.beta.iter().map(|b| b.abs()).sum()
    }

    /// Same grid, different values; values are validated.
    pub fn with_values(&self, beta: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), beta)
    }
}
