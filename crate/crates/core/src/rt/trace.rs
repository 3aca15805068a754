//! Voxel traversal (3D-DDA), transmittance and the sub-stepped emission march
//! shared by the solver, the renderer and their reverse-mode counterparts.

use alloc::vec::Vec;

use crate::math::{attenuated_length, attenuated_length_ds, Vec3};
use crate::scene::{AirProfile, ExtinctionField, MediumOptics, VoxelGrid};
#[allow(unused_imports)]
use crate::prelude::*;

/// Per-voxel optical coefficients in m⁻¹.
#[derive(Debug, Clone)]
pub(crate) struct Medium {
    pub grid: VoxelGrid,
    /// Total extinction σ = (β + β_air) / 1000.
    pub sigma: Vec<f64>,
    /// Cloud scattering coefficient ϖ_c β / 1000.
    pub sc: Vec<f64>,
    /// Air scattering coefficient ϖ_a β_air / 1000.
    pub sa: Vec<f64>,
    pub has_air: bool,
}

impl Medium {
    pub fn new(field: &ExtinctionField, optics: &MediumOptics, air: &AirProfile, wavelength_nm: f64) -> Self {
        let grid = field.grid.clone();
        let air = air.scaled_to_wavelength(wavelength_nm, super::REFERENCE_WAVELENGTH_NM);
        let beta_air: Vec<f64> = (0..grid.nz)
            .map(|k| air.beta_at(grid.origin.z + (k as f64 + 0.5) * grid.dz))
            .collect();
        let nxy = grid.nx * grid.ny;
        let mut sigma = Vec::with_capacity(grid.len());
        let mut sc = Vec::with_capacity(grid.len());
        let mut sa = Vec::with_capacity(grid.len());
        for (v, b) in field.beta.iter().enumerate() {
            let ba = beta_air[v / nxy];
            sigma.push((b + ba) / 1000.0);
            sc.push(optics.cloud.albedo * b / 1000.0);
            sa.push(optics.air.albedo * ba / 1000.0);
        }
        let has_air = sa.iter().any(|v| *v > 0.0);
        Medium {
            grid,
            sigma,
            sc,
            sa,
            has_air,
        }
    }

    #[inline]
    pub fn scatters(&self, u: usize) -> bool {
        self.sc[u] > 0.0 || self.sa[u] > 0.0
    }
}

/// Where a traced ray leaves the domain.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Exit {
    pub point: Vec3,
    /// Left through the bottom face (`z = origin.z`) rather than stopping
    /// early or leaving elsewhere.
    pub bottom: bool,
}

/// Walks the voxels pierced by `p + t d` for `t ∈ [0, t_max]`, calling
/// `f(voxel, t0, t1)` for every non-empty segment in order. `d` must be unit.
pub(crate) fn traverse(
    grid: &VoxelGrid,
    p: Vec3,
    d: Vec3,
    t_max: f64,
    mut f: impl FnMut(usize, f64, f64),
) -> Option<Exit> {
    let lo = grid.origin;
    let hi = grid.max_corner();
    let n = grid.dims();
    let h = grid.spacing();
    let mut t_in = 0.0f64;
    let mut t_out = f64::INFINITY;
    let mut exit_axis = usize::MAX;
    for a in 0..3 {
        if d[a] == 0.0 {
            if p[a] < lo[a] || p[a] > hi[a] {
                return None;
            }
            continue;
        }
        let t1 = (lo[a] - p[a]) / d[a];
        let t2 = (hi[a] - p[a]) / d[a];
        let (tn, tf) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        t_in = t_in.max(tn);
        if tf < t_out {
            t_out = tf;
            exit_axis = a;
        }
    }
    let t_end = t_out.min(t_max);
    if !(t_in < t_end) {
        return None;
    }
    let q = p + d * t_in;
    let mut idx = [0usize; 3];
    let mut step = [0i64; 3];
    for a in 0..3 {
        let f = ((q[a] - lo[a]) / h[a]).floor();
        idx[a] = if f < 0.0 { 0 } else { (f as usize).min(n[a] - 1) };
        step[a] = if d[a] > 0.0 {
            1
        } else if d[a] < 0.0 {
            -1
        } else {
            0
        };
    }
    let next = |a: usize, i: usize| -> f64 {
        if step[a] == 0 {
            return f64::INFINITY;
        }
        let b = if step[a] > 0 { i + 1 } else { i };
        (lo[a] + b as f64 * h[a] - p[a]) / d[a]
    };
    let mut tm = [next(0, idx[0]), next(1, idx[1]), next(2, idx[2])];
    let mut t = t_in;
    loop {
        let a = if tm[0] <= tm[1] && tm[0] <= tm[2] {
            0
        } else if tm[1] <= tm[2] {
            1
        } else {
            2
        };
        let t1 = tm[a].min(t_end);
        if t1 > t {
            f(grid.flat(idx), t, t1);
            t = t1;
        }
        if tm[a] >= t_end {
            break;
        }
        let ni = idx[a] as i64 + step[a];
        if ni < 0 || ni >= n[a] as i64 {
            break;
        }
        idx[a] = ni as usize;
        tm[a] = next(a, idx[a]);
    }
    Some(Exit {
        point: p + d * t_end,
        bottom: t_out <= t_max && exit_axis == 2 && d.z < 0.0,
    })
}

/// Optical depth `∫ σ ds` [dimensionless] from `p` along `d` up to `t_max`.
pub(crate) fn optical_depth(m: &Medium, p: Vec3, d: Vec3, t_max: f64) -> f64 {
    let mut tau = 0.0;
    traverse(&m.grid, p, d, t_max, |u, t0, t1| tau += m.sigma[u] * (t1 - t0));
    tau
}

/// Reverse of `exp(-optical_depth)`: adds `-gbar · T · len` to `adj_sigma`.
pub(crate) fn optical_depth_adjoint(m: &Medium, p: Vec3, d: Vec3, t_max: f64, gbar_t: f64, adj_sigma: &mut [f64]) {
    traverse(&m.grid, p, d, t_max, |u, t0, t1| adj_sigma[u] -= gbar_t * (t1 - t0));
}

/// Transmittance `exp(-∫(β + β_air) ds)` between two points, composed exactly
/// voxel by voxel (β in km⁻¹, lengths in m).
pub fn transmittance(
    field: &ExtinctionField,
    optics: &MediumOptics,
    air: &AirProfile,
    wavelength_nm: f64,
    a: Vec3,
    b: Vec3,
) -> f64 {
    let m = Medium::new(field, optics, air, wavelength_nm);
    let seg = b - a;
    let len = seg.norm();
    if len == 0.0 {
        return 1.0;
    }
    (-optical_depth(&m, a, seg / len, len)).exp()
}

/// One quadrature sample of the emission march, kept for the reverse sweep.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Sample {
    pub u: u32,
    pub x: Vec3,
    pub len: f64,
    pub eta: f64,
    pub trans: f64,
    pub atten: f64,
}

/// Emission march from `p` along `d` to the domain boundary:
/// `Σ η(x_m) T_m a(σ, Δ_m) + T_end · boundary(exit)`.
///
/// Each voxel segment is split into `ceil(len/step)` equal sub-steps with the
/// source evaluated at sub-step midpoints. With `skip_dark` the sub-steps in
/// non-scattering voxels are merged (the value is unchanged up to rounding).
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn march(
    m: &Medium,
    step: f64,
    p: Vec3,
    d: Vec3,
    skip_dark: bool,
    mut emit: impl FnMut(usize, Vec3) -> f64,
    boundary: impl FnOnce(Exit) -> f64,
    mut record: Option<&mut Vec<Sample>>,
) -> (f64, f64) {
    let mut acc = 0.0;
    let mut trans = 1.0;
    let exit = traverse(&m.grid, p, d, f64::INFINITY, |u, t0, t1| {
        let s = m.sigma[u];
        let l = t1 - t0;
        if skip_dark && !m.scatters(u) {
            trans *= (-s * l).exp();
            return;
        }
        let ns = (l / step).ceil().max(1.0);
        let dl = l / ns;
        let a = attenuated_length(s, dl);
        let tr = (-s * dl).exp();
        for j in 0..ns as usize {
            let x = p + d * (t0 + (j as f64 + 0.5) * dl);
            let eta = emit(u, x);
            acc += eta * trans * a;
            if let Some(r) = record.as_deref_mut() {
                r.push(Sample {
                    u: u as u32,
                    x,
                    len: dl,
                    eta,
                    trans,
                    atten: a,
                });
            }
            trans *= tr;
        }
    });
    let b = match exit {
        Some(e) => boundary(e),
        None => boundary(Exit {
            point: p,
            bottom: false,
        }),
    };
    (acc + trans * b, trans)
}

/// Reverse sweep of [`march`] (without dark-voxel merging) for an output
/// adjoint `gbar`. Accumulates `adj_sigma`, and hands `adj η` per sample to
/// `emit_adj` and `adj boundary` to `boundary_adj`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn march_adjoint(
    m: &Medium,
    step: f64,
    p: Vec3,
    d: Vec3,
    gbar: f64,
    emit: impl FnMut(usize, Vec3) -> f64,
    boundary: impl FnOnce(Exit) -> f64,
    mut emit_adj: impl FnMut(usize, Vec3, f64),
    boundary_adj: impl FnOnce(Exit, f64),
    adj_sigma: &mut [f64],
    scratch: &mut Vec<Sample>,
) {
    if gbar == 0.0 {
        return;
    }
    scratch.clear();
    let mut seen = None;
    let (_, t_end) = march(
        m,
        step,
        p,
        d,
        false,
        emit,
        |e| {
            let b = boundary(e);
            seen = Some((e, b));
            b
        },
        Some(scratch),
    );
    let (exit, bval) = seen.expect("march always evaluates the boundary");
    boundary_adj(exit, gbar * t_end);
    let mut tail = t_end * bval;
    for s in scratch.iter().rev() {
        let u = s.u as usize;
        let sig = m.sigma[u];
        adj_sigma[u] += gbar * (-s.len * tail + s.eta * s.trans * attenuated_length_ds(sig, s.len));
        tail += s.eta * s.trans * s.atten;
        emit_adj(u, s.x, gbar * s.trans * s.atten);
    }
}
