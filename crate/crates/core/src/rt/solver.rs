//! Successive orders of scattering on discrete ordinates.
//!
//! Order `k` radiance at voxel centers is `I_k = march(S_k) + T · R_k`, where
//! `S_1` is the scattered direct beam, `S_{k+1} = Q I_k`, and `R_k` is the
//! Lambertian ground reflection of order `k`. The in-scatter fields `S` are
//! stored per ordinate at voxel centers and interpolated trilinearly along
//! rays; the emission at a point of voxel `u` is `sc_u S^c + sa_u S^a`.

use alloc::vec;
use alloc::vec::Vec;

use super::ordinates::Ordinates;
use super::trace::{march, optical_depth, Exit, Medium};
use super::RTConfig;
use crate::error::{invalid, Result};
use crate::math::{dgemm, Vec3, PI};
use crate::par;
use crate::scene::{AirProfile, CameraRig, ExtinctionField, MediumOptics};
#[allow(unused_imports)]
use crate::prelude::*;

/// Static quantities shared by every order and by the renderer.
#[derive(Debug, Clone)]
pub(crate) struct Setup {
    pub med: Medium,
    pub ord: Ordinates,
    pub optics: MediumOptics,
    /// Cloud and air scattering matrices, `N x N` row-major.
    pub qc: Vec<f64>,
    pub qa: Vec<f64>,
    /// Beam phase per ordinate for the direct sun.
    pub pc0: Vec<f64>,
    pub pa0: Vec<f64>,
    pub step: f64,
    pub max_order: usize,
    pub albedo: f64,
    pub f0: f64,
    pub sun: Vec3,
}

impl Setup {
    pub fn new(
        field: &ExtinctionField,
        optics: &MediumOptics,
        air: &AirProfile,
        rig: &CameraRig,
        cfg: &RTConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        optics.validate()?;
        air.validate()?;
        rig.validate()?;
        field.grid.validate()?;
        if field.beta.len() != field.grid.len() {
            return Err(crate::error::shape("extinction values do not match the grid"));
        }
        if field.beta.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(invalid("extinction must be finite and >= 0"));
        }
        let med = Medium::new(field, optics, air, cfg.wavelength_nm);
        let ord = Ordinates::new(cfg.n_mu, cfg.n_phi);
        let qc = ord.phase_matrix(optics.cloud.g);
        let qa = if med.has_air {
            ord.phase_matrix(optics.air.g)
        } else {
            Vec::new()
        };
        let sun = rig.sun_direction;
        Ok(Setup {
            pc0: ord.beam_phase(optics.cloud.g, sun),
            pa0: ord.beam_phase(optics.air.g, sun),
            med,
            ord,
            optics: *optics,
            qc,
            qa,
            step: cfg.step_for(&field.grid),
            max_order: cfg.max_order,
            albedo: cfg.surface_albedo,
            f0: rig.irradiance,
            sun,
        })
    }

    pub fn n(&self) -> usize {
        self.ord.len()
    }

    pub fn v(&self) -> usize {
        self.med.grid.len()
    }

    pub fn has_ground(&self) -> bool {
        self.albedo > 0.0
    }

    /// Downward-travelling ordinates and their `w |μ|` weights.
    pub fn down_ordinates(&self) -> Vec<(usize, f64)> {
        (0..self.n())
            .filter(|&j| self.ord.dirs[j].z < 0.0)
            .map(|j| (j, self.ord.weights[j] * -self.ord.dirs[j].z))
            .collect()
    }

    /// Bilinear ground value at a bottom exit.
    #[inline]
    pub fn ground_value(&self, r: &[f64], e: Exit) -> f64 {
        if !e.bottom || r.is_empty() {
            return 0.0;
        }
        self.med
            .grid
            .bilinear_columns(e.point.x, e.point.y)
            .iter()
            .map(|(c, w)| w * r[*c as usize])
            .sum()
    }

    /// Interpolated in-scatter emission for ordinate row `i` of an order.
    #[inline]
    pub fn emission(&self, o: &Order, i: usize, u: usize, x: Vec3) -> f64 {
        let v = self.v();
        let sc = self.med.sc[u];
        let sa = self.med.sa[u];
        if sc == 0.0 && sa == 0.0 {
            return 0.0;
        }
        let st = self.med.grid.trilinear(x);
        let row_c = &o.sc[i * v..(i + 1) * v];
        let mut c = 0.0;
        for (k, w) in st {
            c += w * row_c[k as usize];
        }
        let mut out = sc * c;
        if sa != 0.0 {
            let row_a = &o.sa[i * v..(i + 1) * v];
            let mut a = 0.0;
            for (k, w) in st {
                a += w * row_a[k as usize];
            }
            out += sa * a;
        }
        out
    }
}

/// In-scatter fields of one scattering order, `N x V` ordinate-major.
#[derive(Debug, Clone)]
pub(crate) struct Order {
    pub sc: Vec<f64>,
    /// Empty when the medium contains no air.
    pub sa: Vec<f64>,
}

/// Solved radiance field with the per-order state needed for rendering and
/// for reverse-mode differentiation.
#[derive(Debug, Clone)]
pub struct RadianceField {
    pub(crate) setup: Setup,
    /// Σ_{k≤K} I_k, `N x V` ordinate-major; empty unless requested.
    pub(crate) radiance: Vec<f64>,
    /// Source J = η / σ, same layout; empty unless requested.
    pub(crate) source: Vec<f64>,
    /// Direct-beam transmittance at voxel centers.
    pub(crate) tsun: Vec<f64>,
    /// Direct-beam transmittance at ground column centers.
    pub(crate) tground: Vec<f64>,
    /// `S_k`, k = 1..K−1 (plus `S_K` when the full field is requested).
    pub(crate) orders: Vec<Order>,
    /// `R_k`, k = 1..K, per ground column; empty for a black surface.
    pub(crate) reflect: Vec<Vec<f64>>,
    /// Σ_{k<K} I_k, voxel-major `V x N`, gathered by camera rays.
    pub(crate) gather: Vec<f64>,
    /// Σ_{k≤K} R_k.
    pub(crate) reflect_total: Vec<f64>,
}

impl RadianceField {
    pub fn grid(&self) -> &crate::scene::VoxelGrid {
        &self.setup.med.grid
    }

    pub fn ordinates(&self) -> &Ordinates {
        &self.setup.ord
    }

    /// I(X_v, ω_i) summed over all orders up to K.
    pub fn radiance(&self, i: usize, v: usize) -> f64 {
        self.radiance[i * self.setup.v() + v]
    }

    pub fn radiance_data(&self) -> &[f64] {
        &self.radiance
    }

    /// J(X_v, ω_i): emission divided by extinction (0 where σ = 0).
    pub fn source(&self, i: usize, v: usize) -> f64 {
        self.source[i * self.setup.v() + v]
    }

    pub fn source_data(&self) -> &[f64] {
        &self.source
    }

    /// Radiance travelling along `omega` arriving at `x`, from the solved
    /// field by final gather (direct sun excluded).
    pub fn radiance_at(&self, x: Vec3, omega: Vec3) -> f64 {
        let s = &self.setup;
        let w = omega.normalized();
        let q = Gather::new(s, w);
        march(
            &s.med,
            s.step,
            x,
            -w,
            true,
            |u, p| q.emission(self, u, p),
            |e| s.ground_value(&self.reflect_total, e),
            None,
        )
        .0
    }
}

/// Per-direction weights for the final gather.
pub(crate) struct Gather {
    pub qc: Vec<f64>,
    pub qa: Vec<f64>,
    pub pc0: f64,
    pub pa0: f64,
}

impl Gather {
    pub fn new(s: &Setup, omega: Vec3) -> Self {
        let mu = omega.dot(s.sun);
        Gather {
            qc: s.ord.gather_weights(s.optics.cloud.g, omega),
            qa: if s.med.has_air {
                s.ord.gather_weights(s.optics.air.g, omega)
            } else {
                Vec::new()
            },
            pc0: s.optics.cloud.phase_4pi(mu),
            pa0: s.optics.air.phase_4pi(mu),
        }
    }

    #[inline]
    pub fn emission(&self, f: &RadianceField, u: usize, x: Vec3) -> f64 {
        let s = &f.setup;
        let sc = s.med.sc[u];
        let sa = s.med.sa[u];
        if sc == 0.0 && sa == 0.0 {
            return 0.0;
        }
        let n = s.n();
        let st = s.med.grid.trilinear(x);
        let mut ts = 0.0;
        let mut gc = 0.0;
        let mut ga = 0.0;
        for (v, w) in st {
            if w == 0.0 {
                continue;
            }
            let v = v as usize;
            ts += w * f.tsun[v];
            let row = &f.gather[v * n..(v + 1) * n];
            gc += w * dot(&self.qc, row);
            if sa != 0.0 {
                ga += w * dot(&self.qa, row);
            }
        }
        let direct = s.f0 * ts;
        sc * (direct * self.pc0 + gc) + sa * (direct * self.pa0 + ga)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Mode {
    /// Also compute `I_K` and the total radiance/source fields.
    pub full: bool,
    /// March every voxel center, not only those the emission can reach.
    pub all_voxels: bool,
}

/// Solves the radiance field by successive orders of scattering up to
/// `cfg.max_order`. The returned field holds I = Σ_{k≤K} I_k and J.
pub fn solve_rt(
    field: &ExtinctionField,
    optics: &MediumOptics,
    air: &AirProfile,
    rig: &CameraRig,
    cfg: &RTConfig,
) -> Result<RadianceField> {
    solve(
        field,
        optics,
        air,
        rig,
        cfg,
        Mode {
            full: true,
            all_voxels: true,
        },
    )
}

pub(crate) fn solve(
    field: &ExtinctionField,
    optics: &MediumOptics,
    air: &AirProfile,
    rig: &CameraRig,
    cfg: &RTConfig,
    mode: Mode,
) -> Result<RadianceField> {
    let s = Setup::new(field, optics, air, rig, cfg)?;
    let n = s.n();
    let v = s.v();
    let grid = &s.med.grid;
    let to_sun = -s.sun;
    let tsun: Vec<f64> = par::map(v, |c| (-optical_depth(&s.med, grid.center_of(c), to_sun, f64::INFINITY)).exp());
    let cols = grid.columns();
    let tground: Vec<f64> = if s.has_ground() {
        par::map(cols, |c| (-optical_depth(&s.med, grid.column_floor_point(c), to_sun, f64::INFINITY)).exp())
    } else {
        Vec::new()
    };
    let active = active_voxels(&s.med, mode.all_voxels);

    let kmax = if mode.full { s.max_order } else { s.max_order - 1 };
    let mut orders: Vec<Order> = Vec::with_capacity(kmax);
    let mut reflect: Vec<Vec<f64>> = Vec::new();
    if s.has_ground() {
        let k = s.albedo / PI * s.f0 * s.sun.z.abs();
        reflect.push(tground.iter().map(|t| k * t).collect());
    }
    let mut gather_om = vec![0.0; if kmax > 0 { n * v } else { 0 }];
    let mut total = vec![0.0; if mode.full { n * v } else { 0 }];

    if kmax >= 1 {
        let mut sc = vec![0.0; n * v];
        let mut sa = vec![0.0; if s.med.has_air { n * v } else { 0 }];
        for i in 0..n {
            for c in 0..v {
                sc[i * v + c] = s.f0 * tsun[c] * s.pc0[i];
                if s.med.has_air {
                    sa[i * v + c] = s.f0 * tsun[c] * s.pa0[i];
                }
            }
        }
        orders.push(Order { sc, sa });
    }
    for k in 1..=kmax {
        let o = &orders[k - 1];
        let r = reflect.get(k - 1).map(|r| r.as_slice()).unwrap_or(&[]);
        let ik = march_order(&s, o, r, &active);
        if k < s.max_order {
            gather_om.iter_mut().zip(&ik).for_each(|(g, x)| *g += x);
        }
        if mode.full {
            total.iter_mut().zip(&ik).for_each(|(g, x)| *g += x);
        }
        if s.has_ground() && k < s.max_order {
            reflect.push(ground_reflection(&s, o));
        }
        if k < kmax {
            let mut sc = vec![0.0; n * v];
            dgemm(n, n, v, &s.qc, &ik, 0.0, &mut sc);
            let mut sa = Vec::new();
            if s.med.has_air {
                sa = vec![0.0; n * v];
                dgemm(n, n, v, &s.qa, &ik, 0.0, &mut sa);
            }
            orders.push(Order { sc, sa });
        }
    }
    let mut gather = vec![0.0; n * v];
    if !gather_om.is_empty() {
        for i in 0..n {
            for c in 0..v {
                gather[c * n + i] = gather_om[i * v + c];
            }
        }
    }
    let mut reflect_total = vec![0.0; if s.has_ground() { cols } else { 0 }];
    for r in &reflect {
        reflect_total.iter_mut().zip(r).for_each(|(t, x)| *t += x);
    }
    let source = if mode.full {
        let mut j = vec![0.0; n * v];
        for o in &orders {
            for i in 0..n {
                for c in 0..v {
                    let sig = s.med.sigma[c];
                    if sig > 0.0 {
                        let mut e = s.med.sc[c] * o.sc[i * v + c];
                        if s.med.has_air {
                            e += s.med.sa[c] * o.sa[i * v + c];
                        }
                        j[i * v + c] += e / sig;
                    }
                }
            }
        }
        j
    } else {
        Vec::new()
    };
    Ok(RadianceField {
        setup: s,
        radiance: total,
        source,
        tsun,
        tground,
        orders,
        reflect,
        gather,
        reflect_total,
    })
}

/// Voxel centers whose radiance can influence any emission: every voxel when
/// requested or when air scatters everywhere, otherwise the scattering voxels
/// dilated by one (the trilinear stencil reach).
pub(crate) fn active_voxels(m: &Medium, all: bool) -> Vec<bool> {
    let g = &m.grid;
    if all || m.has_air {
        return vec![true; g.len()];
    }
    let mut act = vec![false; g.len()];
    for u in 0..g.len() {
        if !m.scatters(u) {
            continue;
        }
        let [i, j, k] = g.unflat(u);
        for dk in -1i64..=1 {
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (a, b, c) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                    if a >= 0 && b >= 0 && c >= 0 && (a as usize) < g.nx && (b as usize) < g.ny && (c as usize) < g.nz {
                        act[g.flat([a as usize, b as usize, c as usize])] = true;
                    }
                }
            }
        }
    }
    act
}

/// `I_k` at the active voxel centers for every ordinate.
fn march_order(s: &Setup, o: &Order, r: &[f64], active: &[bool]) -> Vec<f64> {
    let v = s.v();
    let grid = &s.med.grid;
    let rows = par::map(s.n(), |i| {
        let d = -s.ord.dirs[i];
        let mut row = vec![0.0; v];
        for (c, out) in row.iter_mut().enumerate() {
            if !active[c] {
                continue;
            }
            *out = march(
                &s.med,
                s.step,
                grid.center_of(c),
                d,
                true,
                |u, x| s.emission(o, i, u, x),
                |e| s.ground_value(r, e),
                None,
            )
            .0;
        }
        row
    });
    rows.concat()
}

/// Reflected radiance `R_{k+1}` from the downwelling order-`k` radiance at
/// ground column centers.
fn ground_reflection(s: &Setup, o: &Order) -> Vec<f64> {
    let grid = &s.med.grid;
    let down = s.down_ordinates();
    let k = s.albedo / PI;
    par::map(grid.columns(), |c| {
        let p = grid.column_floor_point(c);
        let mut e = 0.0;
        for &(j, wmu) in &down {
            let (ij, _) = march(
                &s.med,
                s.step,
                p,
                -s.ord.dirs[j],
                true,
                |u, x| s.emission(o, j, u, x),
                |_| 0.0,
                None,
            );
            e += wmu * ij;
        }
        k * e
    })
}
