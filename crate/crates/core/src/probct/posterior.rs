use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
#[allow(unused_imports)]
use crate::prelude::*;
use crate::scene::{ExtinctionField, VoxelGrid};

/// Discretization of the extinction axis: bin `q` stands for `q·Δβ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosteriorSpec {
    pub q: usize,
    /// Bin width [km⁻¹].
    pub dbeta: f64,
}

impl Default for PosteriorSpec {
    fn default() -> Self {
        PosteriorSpec { q: 301, dbeta: 1.0 }
    }
}

impl PosteriorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(invalid("posterior needs at least two bins"));
        }
        if !(self.dbeta > 0.0 && self.dbeta.is_finite()) {
            return Err(invalid("bin width must be positive"));
        }
        Ok(())
    }

    /// Errors when the bins do not reach `max_beta`.
    pub fn check_covers(&self, max_beta: f64) -> Result<()> {
        if self.q as f64 * self.dbeta < max_beta {
            return Err(invalid(format!(
                "{} bins of {} km^-1 do not cover extinction {max_beta}",
                self.q, self.dbeta
            )));
        }
        Ok(())
    }

    /// `floor(β/Δβ)`, clamped to the last bin.
    pub fn bin_of(&self, beta: f64) -> usize {
        let b = (beta.max(0.0) / self.dbeta).floor();
        (b as usize).min(self.q - 1)
    }

    pub fn value(&self, bin: usize) -> f64 {
        bin as f64 * self.dbeta
    }
}

/// Most probable bin value; ties go to the smaller bin.
pub fn map_estimate(p: &[f64], dbeta: f64) -> f64 {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best as f64 * dbeta
}

pub fn mean_estimate(p: &[f64], dbeta: f64) -> f64 {
    p.iter().enumerate().map(|(q, v)| q as f64 * dbeta * v).sum()
}

/// Shannon entropy in bits divided by `log₂ Q`.
pub fn normalized_entropy(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|v| **v > 0.0).map(|v| -v * v.log2()).sum();
    (h / (p.len() as f64).log2()).clamp(0.0, 1.0)
}

pub fn posterior_std(p: &[f64], dbeta: f64) -> f64 {
    let m = mean_estimate(p, dbeta);
    let var: f64 = p
        .iter()
        .enumerate()
        .map(|(q, v)| {
            let d = q as f64 * dbeta - m;
            v * d * d
        })
        .sum();
    var.max(0.0).sqrt()
}

/// `Δβ Σ q Φ_q` with `Φ = P^α / Σ P^α`, evaluated in the log domain.
pub fn smoothmax_estimate(p: &[f64], dbeta: f64, alpha: f64) -> f64 {
    let logs: Vec<f64> = p
        .iter()
        .map(|v| if *v > 0.0 { alpha * v.ln() } else { f64::NEG_INFINITY })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (q, l) in logs.iter().enumerate() {
        let e = (l - m).exp();
        num += q as f64 * e;
        den += e;
    }
    dbeta * num / den
}

/// Per-voxel discrete posteriors over a grid. Voxels that were not queried
/// carry the delta distribution at bin 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub spec: PosteriorSpec,
    pub grid: VoxelGrid,
    /// Queried voxels, flat indices in ascending order.
    pub voxels: Vec<u32>,
    /// `voxels.len() x Q` probabilities, row-major.
    pub probs: Vec<f64>,
    lookup: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl PosteriorGrid {
    pub fn new(spec: PosteriorSpec, grid: VoxelGrid, voxels: Vec<u32>, probs: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        grid.validate()?;
        if probs.len() != voxels.len() * spec.q {
            return Err(shape("posterior payload does not match voxel count x Q"));
        }
        let mut lookup = vec![NONE; grid.len()];
        for (i, &v) in voxels.iter().enumerate() {
            if v as usize >= grid.len() || lookup[v as usize] != NONE {
                return Err(invalid(format!("voxel index {v} is out of range or repeated")));
            }
            lookup[v as usize] = i as u32;
        }
        for (i, row) in probs.chunks(spec.q).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-5 {
                return Err(invalid(format!("posterior of voxel {} is not a distribution (sum {s})", voxels[i])));
            }
        }
        Ok(PosteriorGrid {
            spec,
            grid,
            voxels,
            probs,
            lookup,
        })
    }

    /// Nothing queried.
    pub fn empty(spec: PosteriorSpec, grid: VoxelGrid) -> Self {
        let n = grid.len();
        PosteriorGrid {
            spec,
            grid,
            voxels: Vec::new(),
            probs: Vec::new(),
            lookup: vec![NONE; n],
        }
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Probabilities of the `i`-th queried voxel.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.spec.q..(i + 1) * self.spec.q]
    }

    /// Probabilities at flat voxel `u`; `None` means the delta at bin 0.
    pub fn at(&self, u: usize) -> Option<&[f64]> {
        match self.lookup[u] {
            NONE => None,
            i => Some(self.row(i as usize)),
        }
    }

    /// Full distribution at voxel `u`.
    pub fn distribution(&self, u: usize) -> Vec<f64> {
        match self.at(u) {
            Some(r) => r.to_vec(),
            None => {
                let mut d = vec![0.0; self.spec.q];
                d[0] = 1.0;
                d
            }
        }
    }

    fn per_voxel(&self, f: impl Fn(&[f64]) -> f64, unqueried: f64) -> Vec<f64> {
        (0..self.grid.len())
            .map(|u| self.at(u).map(&f).unwrap_or(unqueried))
            .collect()
    }

    pub fn map_field(&self) -> ExtinctionField {
        let d = self.spec.dbeta;
        self.field(self.per_voxel(|p| map_estimate(p, d), 0.0))
    }

    pub fn mean_field(&self) -> ExtinctionField {
        let d = self.spec.dbeta;
        self.field(self.per_voxel(|p| mean_estimate(p, d), 0.0))
    }

    pub fn std_field(&self) -> Vec<f64> {
        let d = self.spec.dbeta;
        self.per_voxel(|p| posterior_std(p, d), 0.0)
    }

    pub fn entropy_field(&self) -> Vec<f64> {
        self.per_voxel(normalized_entropy, 0.0)
    }

    fn field(&self, beta: Vec<f64>) -> ExtinctionField {
        ExtinctionField {
            grid: self.grid.clone(),
            beta,
        }
    }
}
