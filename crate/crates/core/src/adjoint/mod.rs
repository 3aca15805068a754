//! Reverse-mode differentiation of rendered images with respect to the
//! extinction field, and the physics-based iterative reconstruction.

mod physics;

pub use physics::{solve_physics, PhysicsOptions, PhysicsResult};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape, Result};
use crate::math::{dgemm, PI};
use crate::par;
use crate::rt::solver::{dot, solve, Gather, Mode, Order, RadianceField, Setup};
use crate::rt::trace::{march_adjoint, optical_depth_adjoint, Sample};
use crate::rt::RTConfig;
use crate::scene::{AirProfile, CameraRig, ExtinctionField, ImageSet, ImageUnits, MediumOptics};

/// Per-voxel derivative of a scalar image loss with respect to β [per km⁻¹].
#[derive(Debug, Clone, PartialEq)]
pub struct RenderGradient {
    pub grad: Vec<f64>,
}

/// `Σ ‖y − F(β)‖²` over all pixels and its exact gradient for the discrete
/// forward model. `target` must be in radiance units.
pub fn render_loss_grad(
    field: &ExtinctionField,
    optics: &MediumOptics,
    air: &AirProfile,
    rig: &CameraRig,
    cfg: &RTConfig,
    target: &ImageSet,
) -> Result<(f64, RenderGradient)> {
    if target.units != ImageUnits::Radiance {
        return Err(shape("target images must be in radiance units"));
    }
    target.check_against(rig, None)?;
    let sol = solve(
        field,
        optics,
        air,
        rig,
        cfg,
        Mode {
            full: false,
            all_voxels: true,
        },
    )?;
    let rendered = crate::rt::render_solution(&sol, rig)?;
    let mut loss = 0.0;
    let mut seed = rendered.clone();
    for (c, img) in rendered.data.iter().enumerate() {
        for (p, f) in img.iter().enumerate() {
            let r = f - target.data[c][p];
            loss += r * r;
            seed.data[c][p] = 2.0 * r;
        }
    }
    let grad = render_vjp(&sol, rig, &seed)?;
    Ok((loss, grad))
}

/// Vector–Jacobian product of the renderer: `Σ_pixels seed · ∂F/∂β`.
pub fn render_vjp_field(
    field: &ExtinctionField,
    optics: &MediumOptics,
    air: &AirProfile,
    rig: &CameraRig,
    cfg: &RTConfig,
    seed: &ImageSet,
) -> Result<RenderGradient> {
    let sol = solve(
        field,
        optics,
        air,
        rig,
        cfg,
        Mode {
            full: false,
            all_voxels: true,
        },
    )?;
    render_vjp(&sol, rig, seed)
}

/// Adjoint accumulators over the whole graph.
struct Adj {
    sigma: Vec<f64>,
    sc: Vec<f64>,
    tsun: Vec<f64>,
    tground: Vec<f64>,
}

impl Adj {
    fn zeros(v: usize, cols: usize) -> Self {
        Adj {
            sigma: vec![0.0; v],
            sc: vec![0.0; v],
            tsun: vec![0.0; v],
            tground: vec![0.0; cols],
        }
    }

    fn add(&mut self, o: &Adj) {
        add_into(&mut self.sigma, &o.sigma);
        add_into(&mut self.sc, &o.sc);
        add_into(&mut self.tsun, &o.tsun);
        add_into(&mut self.tground, &o.tground);
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

/// Per-camera reverse results.
struct CameraAdj {
    adj: Adj,
    gather: Vec<f64>,
    reflect: Vec<f64>,
}

fn render_vjp(sol: &RadianceField, rig: &CameraRig, seed: &ImageSet) -> Result<RenderGradient> {
    seed.check_against(rig, None)?;
    if sol.setup.max_order > 1 && sol.gather.len() != sol.setup.n() * sol.setup.v() {
        return Err(shape("solution lacks the gather field"));
    }
    let s = &sol.setup;
    let n = s.n();
    let v = s.v();
    let grid = &s.med.grid;
    let cols = grid.columns();
    let ground = s.has_ground();
    let rcols = if ground { cols } else { 0 };

    // Camera rays.
    let per_cam: Vec<CameraAdj> = par::map(rig.len(), |c| {
        let cam = &rig.cameras[c];
        let mut out = CameraAdj {
            adj: Adj::zeros(v, 0),
            gather: vec![0.0; n * v],
            reflect: vec![0.0; rcols],
        };
        let mut scratch: Vec<Sample> = Vec::new();
        for p in 0..cam.pixels() {
            let gbar = seed.data[c][p];
            if gbar == 0.0 {
                continue;
            }
            let view = cam.pixel_center_ray(p % cam.width, p / cam.width).expect("pixel center");
            let q = Gather::new(s, -view);
            let CameraAdj { adj, gather, reflect } = &mut out;
            march_adjoint(
                &s.med,
                s.step,
                cam.center,
                view,
                gbar,
                |u, x| q.emission(sol, u, x),
                |e| s.ground_value(&sol.reflect_total, e),
                |u, x, a| {
                    let sc = s.med.sc[u];
                    let sa = s.med.sa[u];
                    let st = grid.trilinear(x);
                    let mut ts = 0.0;
                    let mut gc = 0.0;
                    for (k, w) in st {
                        if w == 0.0 {
                            continue;
                        }
                        let k = k as usize;
                        ts += w * sol.tsun[k];
                        let row = &sol.gather[k * n..(k + 1) * n];
                        gc += w * dot(&q.qc, row);
                        adj.tsun[k] += a * w * s.f0 * (sc * q.pc0 + sa * q.pa0);
                        let grow = &mut gather[k * n..(k + 1) * n];
                        if sa != 0.0 {
                            for j in 0..n {
                                grow[j] += a * w * (sc * q.qc[j] + sa * q.qa[j]);
                            }
                        } else if sc != 0.0 {
                            for j in 0..n {
                                grow[j] += a * w * sc * q.qc[j];
                            }
                        }
                    }
                    adj.sc[u] += a * (s.f0 * ts * q.pc0 + gc);
                },
                |e, ab| {
                    if ground && e.bottom {
                        for (k, w) in grid.bilinear_columns(e.point.x, e.point.y) {
                            reflect[k as usize] += ab * w;
                        }
                    }
                },
                &mut adj.sigma,
                &mut scratch,
            );
        }
        out
    });
    let mut adj = Adj::zeros(v, cols);
    let mut adj_gather = vec![0.0; n * v];
    let mut adj_rtot = vec![0.0; rcols];
    for c in &per_cam {
        adj.add(&c.adj);
        add_into(&mut adj_gather, &c.gather);
        add_into(&mut adj_rtot, &c.reflect);
    }
    drop(per_cam);
    // Gather adjoint in ordinate-major layout.
    let mut adj_g = vec![0.0; n * v];
    for c in 0..v {
        for i in 0..n {
            adj_g[i * v + c] = adj_gather[c * n + i];
        }
    }
    drop(adj_gather);

    let qct = transpose(&s.qc, n);
    let qat = if s.med.has_air { transpose(&s.qa, n) } else { Vec::new() };
    let kk = s.max_order;
    // adjoints of S_{k+1} (rolling) and S_k.
    let mut adj_next: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut adj_cur_extra: Option<(Vec<f64>, Vec<f64>)> = None;
    for k in (1..=kk).rev() {
        let mut adj_r = adj_rtot.clone();
        let mut adj_s: Option<(Vec<f64>, Vec<f64>)> = None;
        if k < kk {
            // adj I_k = adj G + Qᵀ adj S_{k+1}.
            let mut adj_i = adj_g.clone();
            if let Some((nc, na)) = &adj_next {
                dgemm(n, n, v, &qct, nc, 1.0, &mut adj_i);
                if s.med.has_air {
                    dgemm(n, n, v, &qat, na, 1.0, &mut adj_i);
                }
            }
            let o = &sol.orders[k - 1];
            let r: &[f64] = sol.reflect.get(k - 1).map(|r| r.as_slice()).unwrap_or(&[]);
            let (a, sc_rows, sa_rows, rr) = reverse_order(s, o, r, &adj_i);
            adj.add(&a);
            add_into(&mut adj_r, &rr);
            let (mut sc_rows, mut sa_rows) = (sc_rows, sa_rows);
            if let Some((ec, ea)) = adj_cur_extra.take() {
                add_into(&mut sc_rows, &ec);
                add_into(&mut sa_rows, &ea);
            }
            adj_s = Some((sc_rows, sa_rows));
        }
        if ground {
            if k >= 2 {
                // R_k = ρ/π Σ_j w_j|μ_j| I_{k−1}(ground, j), marched through S_{k−1}.
                let o = &sol.orders[k - 2];
                let (a, ec, ea) = reverse_ground(s, o, &adj_r);
                adj.add(&a);
                adj_cur_extra = Some((ec, ea));
            } else {
                let f = s.albedo / PI * s.f0 * s.sun.z.abs();
                add_scaled(&mut adj.tground, &adj_r, f);
            }
        }
        if k == 1 {
            if let Some((ac, aa)) = &adj_s {
                for i in 0..n {
                    for c in 0..v {
                        let mut t = ac[i * v + c] * s.pc0[i];
                        if s.med.has_air {
                            t += aa[i * v + c] * s.pa0[i];
                        }
                        adj.tsun[c] += s.f0 * t;
                    }
                }
            }
        }
        adj_next = adj_s;
    }

    // Direct-beam transmittances.
    let to_sun = -s.sun;
    for c in 0..v {
        let g = adj.tsun[c];
        if g != 0.0 {
            optical_depth_adjoint(&s.med, grid.center_of(c), to_sun, f64::INFINITY, g * sol.tsun[c], &mut adj.sigma);
        }
    }
    if ground {
        for c in 0..cols {
            let g = adj.tground[c];
            if g != 0.0 {
                optical_depth_adjoint(
                    &s.med,
                    grid.column_floor_point(c),
                    to_sun,
                    f64::INFINITY,
                    g * sol.tground[c],
                    &mut adj.sigma,
                );
            }
        }
    }
    let wc = s.optics.cloud.albedo;
    let grad: Vec<f64> = (0..v).map(|u| (adj.sigma[u] + wc * adj.sc[u]) / 1000.0).collect();
    if let Some(b) = grad.iter().find(|g| !g.is_finite()) {
        return Err(crate::Error::NonFinite(format!("render gradient component {b}")));
    }
    Ok(RenderGradient { grad })
}

fn add_scaled(a: &mut [f64], b: &[f64], f: f64) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += f * y);
}

fn transpose(q: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = q[i * n + j];
        }
    }
    t
}

/// Reverse of one ordinate sweep `I_k = march(S_k) + T R_k`.
/// Returns the graph adjoints, `adj S^c_k`, `adj S^a_k` and `adj R_k`.
fn reverse_order(s: &Setup, o: &Order, r: &[f64], adj_i: &[f64]) -> (Adj, Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = s.n();
    let v = s.v();
    let grid = &s.med.grid;
    let rcols = r.len();
    let has_air = s.med.has_air;
    let rows = par::map(n, |i| {
        let mut adj = Adj::zeros(v, 0);
        let mut rc = vec![0.0; v];
        let mut ra = vec![0.0; if has_air { v } else { 0 }];
        let mut rr = vec![0.0; rcols];
        let mut scratch = Vec::new();
        let d = -s.ord.dirs[i];
        let row_c = &o.sc[i * v..(i + 1) * v];
        for c in 0..v {
            let gbar = adj_i[i * v + c];
            if gbar == 0.0 {
                continue;
            }
            march_adjoint(
                &s.med,
                s.step,
                grid.center_of(c),
                d,
                gbar,
                |u, x| s.emission(o, i, u, x),
                |e| s.ground_value(r, e),
                |u, x, a| {
                    let sc = s.med.sc[u];
                    let sa = s.med.sa[u];
                    let mut val = 0.0;
                    for (k, w) in grid.trilinear(x) {
                        let k = k as usize;
                        val += w * row_c[k];
                        rc[k] += a * sc * w;
                        if has_air {
                            ra[k] += a * sa * w;
                        }
                    }
                    adj.sc[u] += a * val;
                },
                |e, ab| {
                    if rcols > 0 && e.bottom {
                        for (k, w) in grid.bilinear_columns(e.point.x, e.point.y) {
                            rr[k as usize] += ab * w;
                        }
                    }
                },
                &mut adj.sigma,
                &mut scratch,
            );
        }
        (adj, rc, ra, rr)
    });
    let mut adj = Adj::zeros(v, 0);
    let mut sc = Vec::with_capacity(n * v);
    let mut sa = Vec::with_capacity(if has_air { n * v } else { 0 });
    let mut rr = vec![0.0; rcols];
    for (a, rc, ra, r) in rows {
        adj.add(&a);
        sc.extend_from_slice(&rc);
        sa.extend_from_slice(&ra);
        add_into(&mut rr, &r);
    }
    (adj, sc, sa, rr)
}

/// Reverse of the ground reflection `R_{k+1}` built from order `k` fields.
fn reverse_ground(s: &Setup, o: &Order, adj_r: &[f64]) -> (Adj, Vec<f64>, Vec<f64>) {
    let n = s.n();
    let v = s.v();
    let grid = &s.med.grid;
    let has_air = s.med.has_air;
    let down = s.down_ordinates();
    let k = s.albedo / PI;
    let rows = par::map(down.len(), |di| {
        let (j, wmu) = down[di];
        let mut adj = Adj::zeros(v, 0);
        let mut rc = vec![0.0; v];
        let mut ra = vec![0.0; if has_air { v } else { 0 }];
        let mut scratch = Vec::new();
        let row_c = &o.sc[j * v..(j + 1) * v];
        for (c, ar) in adj_r.iter().enumerate() {
            let gbar = ar * k * wmu;
            if gbar == 0.0 {
                continue;
            }
            march_adjoint(
                &s.med,
                s.step,
                grid.column_floor_point(c),
                -s.ord.dirs[j],
                gbar,
                |u, x| s.emission(o, j, u, x),
                |_| 0.0,
                |u, x, a| {
                    let sc = s.med.sc[u];
                    let sa = s.med.sa[u];
                    let mut val = 0.0;
                    for (q, w) in grid.trilinear(x) {
                        let q = q as usize;
                        val += w * row_c[q];
                        rc[q] += a * sc * w;
                        if has_air {
                            ra[q] += a * sa * w;
                        }
                    }
                    adj.sc[u] += a * val;
                },
                |_, _| {},
                &mut adj.sigma,
                &mut scratch,
            );
        }
        (j, adj, rc, ra)
    });
    let mut adj = Adj::zeros(v, 0);
    let mut sc = vec![0.0; n * v];
    let mut sa = vec![0.0; if has_air { n * v } else { 0 }];
    for (j, a, rc, ra) in rows {
        adj.add(&a);
        sc[j * v..(j + 1) * v].copy_from_slice(&rc);
        if has_air {
            sa[j * v..(j + 1) * v].copy_from_slice(&ra);
        }
    }
    (adj, sc, sa)
}
