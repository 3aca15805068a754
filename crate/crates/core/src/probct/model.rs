use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PosteriorSpec;
use crate::error::{invalid, shape, Result};
use crate::math::Vec3;
use crate::nn::{GatherPlan, Group, Init, NodeId, ParamId, ParamStore, Real, Tape, Tensor};
#[allow(unused_imports)]
use crate::prelude::*;
use crate::scene::{Camera, CameraRig, ImageSet, ImageUnits, SensorSpec, VoxelGrid};

/// Network shape. The decoder input width follows from the camera count,
/// so a model is tied to one rig size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbCtConfig {
    pub posterior: PosteriorSpec,
    pub encoder_width: usize,
    pub encoder_layers: usize,
    /// Channels of the three stride-2 convolution stages.
    pub pyramid_channels: [usize; 3],
    /// Channels of the merged feature map that is sampled.
    pub feature_channels: usize,
    pub decoder_width: usize,
    /// Fully connected layers including the logit layer.
    pub decoder_layers: usize,
}

impl Default for ProbCtConfig {
    fn default() -> Self {
        ProbCtConfig {
            posterior: PosteriorSpec::default(),
            encoder_width: 64,
            encoder_layers: 4,
            pyramid_channels: [16, 32, 64],
            feature_channels: 64,
            decoder_width: 512,
            decoder_layers: 9,
        }
    }
}

impl ProbCtConfig {
    pub fn validate(&self) -> Result<()> {
        self.posterior.validate()?;
        if self.encoder_width == 0 || self.encoder_layers == 0 || self.feature_channels == 0 {
            return Err(invalid("encoder widths and depths must be >= 1"));
        }
        if self.pyramid_channels.contains(&0) {
            return Err(invalid("pyramid channel counts must be >= 1"));
        }
        if self.decoder_width == 0 || self.decoder_layers < 2 {
            return Err(invalid("decoder needs width >= 1 and at least two layers"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Lin {
    w: ParamId,
    b: ParamId,
    group: Group,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    cam: Vec<Lin>,
    dom: Vec<Lin>,
    conv: Vec<Lin>,
    lateral: Vec<Lin>,
    dec: Vec<Lin>,
}

/// The per-voxel posterior network with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbCt {
    pub cfg: ProbCtConfig,
    pub cameras: usize,
    pub params: ParamStore<f32>,
    layout: Layout,
}

fn add_lin(
    store: &mut ParamStore<f32>,
    rng: &mut ChaCha8Rng,
    name: &str,
    group: Group,
    fan_in: usize,
    out: usize,
    gain: f64,
) -> Lin {
    let w = store.add(&format!("{name}.w"), group, fan_in, out, Init::He { fan_in, gain }, rng);
    let b = store.add(&format!("{name}.b"), group, 1, out, Init::Zeros, rng);
    Lin { w, b, group }
}

impl ProbCt {
    /// Fresh He-initialized model. The logit layer starts near zero so the
    /// initial posteriors are close to uniform.
    pub fn new(cfg: ProbCtConfig, cameras: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if cameras == 0 {
            return Err(invalid("model needs at least one camera"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let e = cfg.encoder_width;
        let mlp = |s: &mut ParamStore<f32>, rng: &mut ChaCha8Rng, name: &str, group: Group| {
            (0..cfg.encoder_layers)
                .map(|i| add_lin(s, rng, &format!("{name}{i}"), group, if i == 0 { 3 } else { e }, e, 1.0))
                .collect::<Vec<_>>()
        };
        let cam = mlp(&mut s, &mut rng, "cam", Group::Camera);
        let dom = mlp(&mut s, &mut rng, "dom", Group::Domain);
        let pc = cfg.pyramid_channels;
        let mut conv = Vec::new();
        let mut lateral = Vec::new();
        let mut cin = 1;
        for (i, &c) in pc.iter().enumerate() {
            conv.push(add_lin(&mut s, &mut rng, &format!("conv{i}"), Group::Image, 9 * cin, c, 1.0));
            cin = c;
        }
        for (i, &c) in pc.iter().enumerate() {
            lateral.push(add_lin(&mut s, &mut rng, &format!("lat{i}"), Group::Image, c, cfg.feature_channels, 1.0));
        }
        let width_in = cameras * (cfg.feature_channels + e) + e;
        let mut dec = Vec::new();
        let mut fin = width_in;
        for i in 0..cfg.decoder_layers {
            let last = i + 1 == cfg.decoder_layers;
            let out = if last { cfg.posterior.q } else { cfg.decoder_width };
            let gain = if last { 0.01 } else { 1.0 };
            dec.push(add_lin(&mut s, &mut rng, &format!("dec{i}"), Group::Decoder, fin, out, gain));
            fin = out;
        }
        Ok(ProbCt {
            cfg,
            cameras,
            params: s,
            layout: Layout {
                cam,
                dom,
                conv,
                lateral,
                dec,
            },
        })
    }

    /// Rebuilds a model around stored parameters, checking names and shapes.
    pub fn from_params(cfg: ProbCtConfig, cameras: usize, params: ParamStore<f32>) -> Result<Self> {
        let mut m = Self::new(cfg, cameras, 0)?;
        let a = m.params.blocks();
        let b = params.blocks();
        if a.len() != b.len() {
            return Err(shape(format!("checkpoint has {} blocks, model expects {}", b.len(), a.len())));
        }
        for (x, y) in a.iter().zip(b) {
            if x.name != y.name || x.rows != y.rows || x.cols != y.cols || x.group != y.group {
                return Err(shape(format!(
                    "checkpoint block '{}' ({}x{}) does not match '{}' ({}x{})",
                    y.name, y.rows, y.cols, x.name, x.rows, x.cols
                )));
            }
        }
        m.params = params;
        Ok(m)
    }

    /// Width of the decoder input `[v, g_domain, g_cam...]`.
    pub fn input_width(&self) -> usize {
        self.cameras * (self.cfg.feature_channels + self.cfg.encoder_width) + self.cfg.encoder_width
    }

    /// Domain-encoder features of one normalized point.
    pub fn encode_coords(&self, x: [f64; 3]) -> Vec<f32> {
        let mut tape = Tape::new();
        let i = tape.input(Tensor::from_f64(1, 3, &x));
        let o = self.mlp(&mut tape, &self.params, &self.layout.dom, i, &|_| false);
        tape.value(o).data.clone()
    }

    /// Camera-encoder features, one row per camera.
    pub fn encode_cameras(&self, rig: &CameraRig, grid: &VoxelGrid) -> Vec<Vec<f32>> {
        let x = camera_inputs::<f32>(&rig.cameras, grid);
        let mut tape = Tape::new();
        let i = tape.input(x);
        let o = self.mlp(&mut tape, &self.params, &self.layout.cam, i, &|_| false);
        let v = tape.value(o);
        (0..v.rows).map(|r| v.row(r).to_vec()).collect()
    }

    /// Merged feature map of every camera at half image resolution:
    /// `(ceil(h/2)·ceil(w/2)) x C` per camera, rows in raster order.
    pub fn extract_features(&self, images: &ImageSet, sensor: &SensorSpec) -> Result<Vec<Tensor<f32>>> {
        let pyr = Pyramid::<f32>::new(images, sensor)?;
        let mut tape = Tape::new();
        let f = self.feature_map(&mut tape, &self.params, &pyr, &|_| false);
        let v = tape.value(f);
        Ok(pyr
            .level1
            .iter()
            .map(|&(off, w, h)| {
                let c = v.cols;
                Tensor::from_vec(w * h, c, v.data[off * c..(off + w * h) * c].to_vec())
            })
            .collect())
    }

    /// Decoder posterior for one input vector `u`.
    pub fn decode(&self, u: &[f32]) -> Result<Vec<f64>> {
        if u.len() != self.input_width() {
            return Err(shape(format!("decoder input has {} values, expected {}", u.len(), self.input_width())));
        }
        let mut tape = Tape::new();
        let i = tape.input(Tensor::from_vec(1, u.len(), u.to_vec()));
        let l = self.decoder(&mut tape, &self.params, i, &|_| false);
        let s = tape.softmax(l);
        Ok(tape.value(s).to_f64())
    }

    fn check_rig(&self, rig: &CameraRig) -> Result<()> {
        if rig.len() != self.cameras {
            return Err(shape(format!("model expects {} cameras, rig has {}", self.cameras, rig.len())));
        }
        Ok(())
    }

    fn lin<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        l: Lin,
        x: NodeId,
        train: &dyn Fn(Group) -> bool,
    ) -> NodeId {
        let t = train(l.group);
        let w = tape.param(store, l.w, t);
        let b = tape.param(store, l.b, t);
        tape.linear(x, w, Some(b))
    }

    fn mlp<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        layers: &[Lin],
        mut x: NodeId,
        train: &dyn Fn(Group) -> bool,
    ) -> NodeId {
        for &l in layers {
            let h = self.lin(tape, store, l, x, train);
            x = tape.relu(h);
        }
        x
    }

    /// Feature-pyramid forward pass; returns the finest merged map.
    pub(crate) fn feature_map<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        pyr: &Pyramid<T>,
        train: &dyn Fn(Group) -> bool,
    ) -> NodeId {
        let mut x = tape.input(pyr.image.clone());
        let mut stages = Vec::with_capacity(3);
        for (l, plan) in self.layout.conv.iter().zip(&pyr.conv) {
            let patches = tape.gather(x, plan.clone());
            let h = self.lin(tape, store, *l, patches, train);
            x = tape.relu(h);
            stages.push(x);
        }
        let lat: Vec<NodeId> = self
            .layout
            .lateral
            .iter()
            .zip(&stages)
            .map(|(l, s)| self.lin(tape, store, *l, *s, train))
            .collect();
        let up2 = tape.gather(lat[2], pyr.up[1].clone());
        let p2 = tape.add(lat[1], up2);
        let up1 = tape.gather(p2, pyr.up[0].clone());
        tape.add(lat[0], up1)
    }

    /// Decoder input rows `[v, g_domain, g_cam...]` for the given voxels.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn query<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        pyr: &Pyramid<T>,
        fmap: NodeId,
        rig: &CameraRig,
        grid: &VoxelGrid,
        voxels: &[usize],
        train: &dyn Fn(Group) -> bool,
    ) -> NodeId {
        let n = voxels.len();
        let plan = sample_plan::<T>(&pyr.level1, pyr.level1_rows, &rig.cameras, grid, voxels);
        let v = tape.gather(fmap, Arc::new(plan));
        let pts: Vec<f64> = voxels
            .iter()
            .flat_map(|&u| grid.normalize(grid.center_of(u)).to_array())
            .collect();
        let pi = tape.input(Tensor::from_f64(n, 3, &pts));
        let gd = self.mlp(tape, store, &self.layout.dom, pi, train);
        let ci = tape.input(camera_inputs::<T>(&rig.cameras, grid));
        let gc = self.mlp(tape, store, &self.layout.cam, ci, train);
        let nc = rig.len();
        let mut b = GatherPlan::builder(n, nc, nc);
        for _ in 0..n {
            for c in 0..nc {
                b.push(c, T::one());
                b.next_slot();
            }
        }
        let gcb = tape.gather(gc, Arc::new(b.finish()));
        tape.concat(&[v, gd, gcb])
    }

    /// Logits of the decoder.
    pub(crate) fn decoder<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        mut x: NodeId,
        train: &dyn Fn(Group) -> bool,
    ) -> NodeId {
        let n = self.layout.dec.len();
        for (i, &l) in self.layout.dec.iter().enumerate() {
            x = self.lin(tape, store, l, x, train);
            if i + 1 < n {
                x = tape.relu(x);
            }
        }
        x
    }

    /// Logits for `voxels` of one scene on a fresh graph built on `tape`.
    #[cfg(test)]
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn scene_logits<T: Real>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        pyr: &Pyramid<T>,
        rig: &CameraRig,
        grid: &VoxelGrid,
        voxels: &[usize],
        train: &dyn Fn(Group) -> bool,
    ) -> NodeId {
        let f = self.feature_map(tape, store, pyr, train);
        let u = self.query(tape, store, pyr, f, rig, grid, voxels, train);
        self.decoder(tape, store, u, train)
    }

    /// Posterior rows (`voxels.len() x Q`) for the given voxels of one scene.
    pub fn posteriors(
        &self,
        images: &ImageSet,
        rig: &CameraRig,
        grid: &VoxelGrid,
        sensor: &SensorSpec,
        voxels: &[usize],
    ) -> Result<Vec<f64>> {
        self.check_rig(rig)?;
        images.check_against(rig, None)?;
        if let Some(&u) = voxels.iter().find(|&&u| u >= grid.len()) {
            return Err(invalid(format!("voxel {u} outside the grid")));
        }
        let pyr = Pyramid::<f32>::new(images, sensor)?;
        let mut tape = Tape::new();
        let fmap_node = self.feature_map(&mut tape, &self.params, &pyr, &|_| false);
        let fmap = tape.value(fmap_node).clone();
        const CHUNK: usize = 512;
        let chunks: Vec<&[usize]> = voxels.chunks(CHUNK).collect();
        let rows = crate::par::map(chunks.len(), |i| {
            let mut tape = Tape::new();
            let f = tape.input(fmap.clone());
            let u = self.query(&mut tape, &self.params, &pyr, f, rig, grid, chunks[i], &|_| false);
            let l = self.decoder(&mut tape, &self.params, u, &|_| false);
            let s = tape.softmax(l);
            tape.value(s).to_f64()
        });
        Ok(rows.into_iter().flatten().collect())
    }
}

/// Normalized image tensor and the fixed resampling plans of the pyramid.
#[derive(Debug, Clone)]
pub(crate) struct Pyramid<T> {
    image: Tensor<T>,
    conv: [Arc<GatherPlan<T>>; 3],
    up: [Arc<GatherPlan<T>>; 2],
    /// `(row offset, width, height)` of each camera in the finest map.
    pub(crate) level1: Vec<(usize, usize, usize)>,
    pub(crate) level1_rows: usize,
}

/// Pixel values scaled to `[0, 1]`: graylevels by the sensor range,
/// radiance by the brightest pixel of the set.
pub fn normalized_pixels(images: &ImageSet, sensor: &SensorSpec) -> Vec<Vec<f64>> {
    let s = match images.units {
        ImageUnits::Graylevel => sensor.max_graylevel(),
        ImageUnits::Radiance => images.max(),
    };
    let k = if s > 0.0 { 1.0 / s } else { 0.0 };
    images.data.iter().map(|im| im.iter().map(|v| v * k).collect()).collect()
}

impl<T: Real> Pyramid<T> {
    pub(crate) fn new(images: &ImageSet, sensor: &SensorSpec) -> Result<Pyramid<T>> {
        images.validate()?;
        let px = normalized_pixels(images, sensor);
        let image = Tensor::from_f64(px.iter().map(|p| p.len()).sum(), 1, &px.concat());
        let mut sizes: Vec<Vec<(usize, usize)>> = vec![images.widths.iter().cloned().zip(images.heights.iter().cloned()).collect()];
        for l in 0..3 {
            let next = sizes[l].iter().map(|&(w, h)| (w.div_ceil(2), h.div_ceil(2))).collect();
            sizes.push(next);
        }
        let offsets = |s: &[(usize, usize)]| {
            let mut o = Vec::with_capacity(s.len());
            let mut acc = 0;
            for &(w, h) in s {
                o.push(acc);
                acc += w * h;
            }
            (o, acc)
        };
        let conv: Vec<Arc<GatherPlan<T>>> = (0..3)
            .map(|l| {
                let (oi, ni) = offsets(&sizes[l]);
                let (_, no) = offsets(&sizes[l + 1]);
                let mut b = GatherPlan::builder(no, 9, ni);
                for (c, &(wo, ho)) in sizes[l + 1].iter().enumerate() {
                    let (wi, hi) = sizes[l][c];
                    for r in 0..ho {
                        for q in 0..wo {
                            for dy in 0..3 {
                                for dx in 0..3 {
                                    let y = (2 * r + dy) as isize - 1;
                                    let x = (2 * q + dx) as isize - 1;
                                    if y >= 0 && x >= 0 && (y as usize) < hi && (x as usize) < wi {
                                        b.push(oi[c] + y as usize * wi + x as usize, T::one());
                                    }
                                    b.next_slot();
                                }
                            }
                        }
                    }
                }
                Arc::new(b.finish())
            })
            .collect();
        let up: Vec<Arc<GatherPlan<T>>> = (1..3)
            .map(|l| {
                let (of, nf) = offsets(&sizes[l]);
                let (oc, nc) = offsets(&sizes[l + 1]);
                let mut b = GatherPlan::builder(nf, 1, nc);
                for (c, &(wf, hf)) in sizes[l].iter().enumerate() {
                    let wc = sizes[l + 1][c].0;
                    for r in 0..hf {
                        for q in 0..wf {
                            b.push(oc[c] + (r / 2) * wc + q / 2, T::one());
                            b.next_slot();
                        }
                    }
                    debug_assert!(of[c] + wf * hf <= nf);
                }
                Arc::new(b.finish())
            })
            .collect();
        let (o1, n1) = offsets(&sizes[1]);
        Ok(Pyramid {
            image,
            conv: [conv[0].clone(), conv[1].clone(), conv[2].clone()],
            up: [up[0].clone(), up[1].clone()],
            level1: o1.iter().zip(&sizes[1]).map(|(&o, &(w, h))| (o, w, h)).collect(),
            level1_rows: n1,
        })
    }
}

/// Normalized camera centers; points beyond the unit ball are pulled onto
/// its surface so that distant cameras stay in the encoder's input range.
fn camera_inputs<T: Real>(cams: &[Camera], grid: &VoxelGrid) -> Tensor<T> {
    let v: Vec<f64> = cams
        .iter()
        .flat_map(|c| {
            let p = grid.normalize(c.center);
            let n = p.norm();
            let p = if n > 1.0 { p / n } else { p };
            p.to_array()
        })
        .collect();
    Tensor::from_f64(cams.len(), 3, &v)
}

/// Bilinear taps `(row, weight)` of the half-resolution map for image
/// coordinate `p`, clamped at the map border.
pub fn bilinear_taps(p: [f64; 2], w: usize, h: usize) -> [(usize, f64); 4] {
    let axis = |x: f64, n: usize| {
        let f = (x / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = (f.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, f - i0 as f64)
    };
    let (x0, x1, tx) = axis(p[0], w);
    let (y0, y1, ty) = axis(p[1], h);
    [
        (y0 * w + x0, (1.0 - tx) * (1.0 - ty)),
        (y0 * w + x1, tx * (1.0 - ty)),
        (y1 * w + x0, (1.0 - tx) * ty),
        (y1 * w + x1, tx * ty),
    ]
}

/// Taps of one camera for a world point; `None` when the point is behind the
/// camera or projects outside the frame.
fn camera_taps(cam: &Camera, w: usize, h: usize, x: Vec3) -> Option<[(usize, f64); 4]> {
    let p = cam.project(x).ok()?;
    cam.in_frame(p).then(|| bilinear_taps(p, w, h))
}

fn sample_plan<T: Real>(
    level1: &[(usize, usize, usize)],
    rows: usize,
    cams: &[Camera],
    grid: &VoxelGrid,
    voxels: &[usize],
) -> GatherPlan<T> {
    let mut b = GatherPlan::builder(voxels.len(), cams.len(), rows);
    for &u in voxels {
        let x = grid.center_of(u);
        for (cam, &(off, w, h)) in cams.iter().zip(level1) {
            if let Some(taps) = camera_taps(cam, w, h, x) {
                for (i, wt) in taps {
                    if wt != 0.0 {
                        b.push(off + i, T::from_f64(wt));
                    }
                }
            }
            b.next_slot();
        }
    }
    b.finish()
}

/// Concatenated per-camera samples of extracted feature maps at world point
/// `x`, zeros for cameras that do not see it.
pub fn sample_features(maps: &[Tensor<f32>], rig: &CameraRig, x: Vec3) -> Result<Vec<f32>> {
    if maps.len() != rig.len() {
        return Err(shape("one feature map per camera is required"));
    }
    let mut out = Vec::new();
    for (cam, m) in rig.cameras.iter().zip(maps) {
        let (w, h) = (cam.width.div_ceil(2), cam.height.div_ceil(2));
        if m.rows != w * h {
            return Err(shape("feature map size does not match the camera"));
        }
        let mut v = vec![0.0f32; m.cols];
        if let Some(taps) = camera_taps(cam, w, h, x) {
            for (i, wt) in taps {
                for (o, s) in v.iter_mut().zip(m.row(i)) {
                    *o += wt as f32 * s;
                }
            }
        }
        out.extend(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::CameraRig;

    fn tiny() -> ProbCtConfig {
        ProbCtConfig {
            posterior: PosteriorSpec { q: 6, dbeta: 2.0 },
            encoder_width: 4,
            encoder_layers: 2,
            pyramid_channels: [2, 3, 4],
            feature_channels: 3,
            decoder_width: 5,
            decoder_layers: 3,
        }
    }

    #[test]
    fn every_parameter_gradient_matches_finite_differences() {
        let grid = VoxelGrid::cube(3, 20.0, Vec3::ZERO).unwrap();
        let c = grid.center();
        let cams = (0..2)
            .map(|k| {
                let pos = c + Vec3::new(150.0 * (k as f64 * 2.0).cos(), 150.0 * (k as f64 * 2.0).sin(), 100.0);
                Camera::look_at(pos, c, Vec3::new(0.0, 0.0, 1.0), 35.0, 7, 6).unwrap()
            })
            .collect();
        let rig = CameraRig::new(cams, Vec3::new(0.0, 0.0, -1.0), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        use rand::Rng;
        let data = (0..2).map(|_| (0..42).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let images = ImageSet::new(ImageUnits::Radiance, vec![7, 7], vec![6, 6], data, None).unwrap();
        let model = ProbCt::new(tiny(), 2, 3).unwrap();
        let mut store = model.params.cast::<f64>();
        // Non-zero biases so every path carries signal.
        for b in store.blocks_mut() {
            for v in b.data.iter_mut() {
                *v += rng.random_range(-0.1..0.1);
            }
        }
        let pyr = Pyramid::<f64>::new(&images, &SensorSpec::default()).unwrap();
        let voxels = [0usize, 13, 26, 5];
        let loss = |s: &ParamStore<f64>, tape: &mut Tape<f64>| {
            let l = model.scene_logits(tape, s, &pyr, &rig, &grid, &voxels, &|_| true);
            tape.weighted_ce(l, &[1, 0, 5, 3], &[1.0, 0.5, 1.0, 0.01])
        };
        let mut tape = Tape::new();
        let out = loss(&store, &mut tape);
        tape.backward(out);
        let grads = tape.param_grads(&store);
        let h = 1e-6;
        let mut checked = 0;
        for (bi, g) in grads.iter().enumerate() {
            for i in 0..g.len() {
                let eval = |d: f64| {
                    let mut s = store.clone();
                    s.blocks_mut()[bi].data[i] += d;
                    let mut t = Tape::new();
                    let o = loss(&s, &mut t);
                    t.value(o).data[0]
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                // absolute floor covers FD round-off of an O(1) loss
                let tol = 1e-4 * g[i].abs().max(fd.abs()) + 1e-9;
                assert!((g[i] - fd).abs() <= tol, "{} [{i}]: {} vs {fd}", store.blocks()[bi].name, g[i]);
                checked += usize::from(g[i] != 0.0);
            }
        }
        assert!(checked > store.num_values() / 2);
    }
}
