use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::Vec3;
#[allow(unused_imports)]
use crate::prelude::*;

/// Integer voxel coordinates.
pub type VoxelIndex = [usize; 3];

/// Regular axis-aligned voxel grid. Lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub origin: Vec3,
}

impl VoxelGrid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: Vec3) -> Result<Self> {
        let g = VoxelGrid {
            nx: dims[0],
            ny: dims[1],
            nz: dims[2],
            dx: spacing[0],
            dy: spacing[1],
            dz: spacing[2],
            origin,
        };
        g.validate()?;
        Ok(g)
    }

    /// Cubic voxels of edge `edge`, `n` per axis.
    pub fn cube(n: usize, edge: f64, origin: Vec3) -> Result<Self> {
        Self::new([n, n, n], [edge, edge, edge], origin)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(invalid("voxel counts must be >= 1"));
        }
        for d in [self.dx, self.dy, self.dz] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid("voxel edge lengths must be positive and finite"));
            }
        }
        if !(self.origin.x.is_finite() && self.origin.y.is_finite() && self.origin.z.is_finite()) {
            return Err(invalid("grid origin must be finite"));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min_edge(&self) -> f64 {
        self.dx.min(self.dy).min(self.dz)
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.nx as f64 * self.dx,
            self.ny as f64 * self.dy,
            self.nz as f64 * self.dz,
        )
    }

    /// Upper corner of the domain.
    pub fn max_corner(&self) -> Vec3 {
        self.origin + self.extent()
    }

    pub fn center(&self) -> Vec3 {
        self.origin + self.extent() * 0.5
    }

    pub fn voxel_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    /// Flat x-fastest offset.
    #[inline]
    pub fn flat(&self, [i, j, k]: VoxelIndex) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn unflat(&self, n: usize) -> VoxelIndex {
        let i = n % self.nx;
        let j = (n / self.nx) % self.ny;
        let k = n / (self.nx * self.ny);
        [i, j, k]
    }

    /// Voxel containing `p` under the floor mapping, `None` outside the
    /// half-open domain `[origin, origin + extent)`.
    pub fn world_to_index(&self, p: Vec3) -> Option<VoxelIndex> {
        let f = [
            ((p.x - self.origin.x) / self.dx).floor(),
            ((p.y - self.origin.y) / self.dy).floor(),
            ((p.z - self.origin.z) / self.dz).floor(),
        ];
        let n = self.dims();
        let mut out = [0usize; 3];
        for a in 0..3 {
            if !(f[a] >= 0.0 && f[a] < n[a] as f64) {
                return None;
            }
            out[a] = f[a] as usize;
        }
        Some(out)
    }

    /// Center of a voxel.
    pub fn index_to_world(&self, [i, j, k]: VoxelIndex) -> Vec3 {
        Vec3::new(
            self.origin.x + (i as f64 + 0.5) * self.dx,
            self.origin.y + (j as f64 + 0.5) * self.dy,
            self.origin.z + (k as f64 + 0.5) * self.dz,
        )
    }

    pub fn center_of(&self, flat: usize) -> Vec3 {
        self.index_to_world(self.unflat(flat))
    }

    /// Whether `p` lies in the closed domain box.
    pub fn contains(&self, p: Vec3) -> bool {
        let hi = self.max_corner();
        p.x >= self.origin.x
            && p.y >= self.origin.y
            && p.z >= self.origin.z
            && p.x <= hi.x
            && p.y <= hi.y
            && p.z <= hi.z
    }

    /// Maps a world point to `[-1, 1]` per axis over the domain box.
    pub fn normalize(&self, p: Vec3) -> Vec3 {
        let c = self.center();
        let h = self.extent() * 0.5;
        Vec3::new((p.x - c.x) / h.x, (p.y - c.y) / h.y, (p.z - c.z) / h.z)
    }

    /// Trilinear interpolation stencil over voxel centers (clamped at the
    /// boundary). Returns 8 `(flat index, weight)` pairs; weights sum to 1.
    #[inline]
    pub fn trilinear(&self, p: Vec3) -> [(u32, f64); 8] {
        let (i0, i1, fx) = axis_stencil((p.x - self.origin.x) / self.dx - 0.5, self.nx);
        let (j0, j1, fy) = axis_stencil((p.y - self.origin.y) / self.dy - 0.5, self.ny);
        let (k0, k1, fz) = axis_stencil((p.z - self.origin.z) / self.dz - 0.5, self.nz);
        let nx = self.nx;
        let nxy = self.nx * self.ny;
        let idx = |i: usize, j: usize, k: usize| (i + nx * j + nxy * k) as u32;
        let (gx, gy, gz) = (1.0 - fx, 1.0 - fy, 1.0 - fz);
        [
            (idx(i0, j0, k0), gx * gy * gz),
            (idx(i1, j0, k0), fx * gy * gz),
            (idx(i0, j1, k0), gx * fy * gz),
            (idx(i1, j1, k0), fx * fy * gz),
            (idx(i0, j0, k1), gx * gy * fz),
            (idx(i1, j0, k1), fx * gy * fz),
            (idx(i0, j1, k1), gx * fy * fz),
            (idx(i1, j1, k1), fx * fy * fz),
        ]
    }

    /// Bilinear stencil over the `nx x ny` column centers at horizontal
    /// position `(x, y)`. Returns 4 `(column index, weight)` pairs.
    #[inline]
    pub fn bilinear_columns(&self, x: f64, y: f64) -> [(u32, f64); 4] {
        let (i0, i1, fx) = axis_stencil((x - self.origin.x) / self.dx - 0.5, self.nx);
        let (j0, j1, fy) = axis_stencil((y - self.origin.y) / self.dy - 0.5, self.ny);
        let nx = self.nx;
        let idx = |i: usize, j: usize| (i + nx * j) as u32;
        [
            (idx(i0, j0), (1.0 - fx) * (1.0 - fy)),
            (idx(i1, j0), fx * (1.0 - fy)),
            (idx(i0, j1), (1.0 - fx) * fy),
            (idx(i1, j1), fx * fy),
        ]
    }

    /// Center of the bottom face of column `(i, j)`.
    pub fn column_floor_point(&self, col: usize) -> Vec3 {
        let i = col % self.nx;
        let j = col / self.nx;
        Vec3::new(
            self.origin.x + (i as f64 + 0.5) * self.dx,
            self.origin.y + (j as f64 + 0.5) * self.dy,
            self.origin.z,
        )
    }

    pub fn columns(&self) -> usize {
        self.nx * self.ny
    }
}

#[inline]
fn axis_stencil(f: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 || f <= 0.0 {
        return (0, 0, 0.0);
    }
    let last = (n - 1) as f64;
    if f >= last {
        return (n - 1, n - 1, 0.0);
    }
    let i0 = f.floor();
    let t = f - i0;
    let i0 = i0 as usize;
    (i0, i0 + 1, t)
}
