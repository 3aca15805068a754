//! Supervised and self-supervised optimization of the posterior network,
//! plus the space-carving cloud mask.

mod carve;

pub use carve::space_carve;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::render_loss_grad;
use crate::error::{invalid, shape, Error, Result};
use crate::nn::{AdamConfig, Group, Tape, Tensor};
use crate::probct::{PosteriorSpec, ProbCt, Pyramid, SMOOTHMAX_ALPHA};
use crate::rt::RTConfig;
use crate::scene::{AirProfile, CameraRig, ExtinctionField, ImageSet, MediumOptics, SensorSpec};

/// Ground-truth extinction with its noisy multi-view images.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScene {
    pub field: ExtinctionField,
    pub images: ImageSet,
    pub rig: CameraRig,
    /// Voxels eligible for training queries; `None` derives a carve mask.
    pub mask: Option<Vec<bool>>,
}

/// Images without ground truth, for self-supervised refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledScene {
    pub grid: crate::scene::VoxelGrid,
    pub images: ImageSet,
    pub rig: CameraRig,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub voxels_per_iteration: usize,
    pub scenes_per_iteration: usize,
    pub lr_supervised: f64,
    pub lr_selfsupervised: f64,
    pub weight_decay: f64,
    /// Loss weight of voxels whose true extinction is below half a bin.
    pub cloud_weight: f64,
    pub shuffle_cameras: bool,
    /// Carve threshold as a fraction of the brightest pixel of a scene.
    pub carve_fraction: f64,
    /// Cameras that must agree in the carve; `None` means all in-frame ones.
    pub carve_agreement: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 5000,
            voxels_per_iteration: 1000,
            scenes_per_iteration: 1,
            lr_supervised: 5e-5,
            lr_selfsupervised: 1e-5,
            weight_decay: 1e-5,
            cloud_weight: 0.01,
            shuffle_cameras: true,
            carve_fraction: 0.05,
            carve_agreement: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.voxels_per_iteration == 0 || self.scenes_per_iteration == 0 {
            return Err(invalid("batch sizes must be >= 1"));
        }
        for lr in [self.lr_supervised, self.lr_selfsupervised] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(invalid("learning rates must be positive"));
            }
        }
        if !(self.weight_decay >= 0.0) {
            return Err(invalid("weight decay must be >= 0"));
        }
        if !(self.cloud_weight > 0.0 && self.cloud_weight <= 1.0) {
            return Err(invalid("cloud weight must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.carve_fraction) {
            return Err(invalid("carve fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One-hot vector at `floor(β/Δβ)`.
pub fn true_posterior_vector(beta: f64, spec: &PosteriorSpec) -> Vec<f64> {
    let mut v = vec![0.0; spec.q];
    v[spec.bin_of(beta)] = 1.0;
    v
}

/// `−ln P̂[true bin]` for a one-hot truth.
pub fn cross_entropy(truth: &[f64], p: &[f64]) -> f64 {
    truth
        .iter()
        .zip(p)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, q)| -t * q.ln())
        .sum()
}

pub fn cloud_weight(beta: f64, spec: &PosteriorSpec, cfg: &TrainConfig) -> f64 {
    if beta >= spec.dbeta / 2.0 {
        1.0
    } else {
        cfg.cloud_weight
    }
}

/// Per-iteration record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ProbCt,
    /// Weighted mean cross entropy of each iteration.
    pub losses: Vec<f64>,
}

/// Carve mask of a scene under the training settings.
pub fn scene_mask(scene: &LabeledScene, cfg: &TrainConfig) -> Result<Vec<bool>> {
    match &scene.mask {
        Some(m) if m.len() == scene.field.len() => Ok(m.clone()),
        Some(_) => Err(shape("scene mask size differs from the grid")),
        None => space_carve(
            &scene.images,
            &scene.rig,
            &scene.field.grid,
            cfg.carve_fraction * scene.images.max(),
            cfg.carve_agreement,
        ),
    }
}

/// Weighted cross entropy `Σ w·CE` and `Σ w` of the model on given voxels of
/// one scene, without shuffling.
pub fn supervised_loss(
    model: &ProbCt,
    scene: &LabeledScene,
    voxels: &[usize],
    cfg: &TrainConfig,
    sensor: &SensorSpec,
) -> Result<(f64, f64)> {
    let spec = model.cfg.posterior;
    let probs = model.posteriors(&scene.images, &scene.rig, &scene.field.grid, sensor, voxels)?;
    let mut loss = 0.0;
    let mut wsum = 0.0;
    for (i, &u) in voxels.iter().enumerate() {
        let b = scene.field.beta[u];
        let w = cloud_weight(b, &spec, cfg);
        loss += w * -probs[i * spec.q + spec.bin_of(b)].ln();
        wsum += w;
    }
    Ok((loss, wsum))
}

/// Weighted mean cross entropy over the mask voxels of every scene, as used
/// for held-out validation.
pub fn dataset_loss(model: &ProbCt, scenes: &[LabeledScene], cfg: &TrainConfig, sensor: &SensorSpec) -> Result<f64> {
    let parts = crate::par::map(scenes.len(), |i| -> Result<(f64, f64)> {
        let s = &scenes[i];
        let m = scene_mask(s, cfg)?;
        let vox: Vec<usize> = (0..m.len()).filter(|&u| m[u]).collect();
        if vox.is_empty() {
            return Ok((0.0, 0.0));
        }
        supervised_loss(model, s, &vox, cfg, sensor)
    });
    let (mut loss, mut wsum) = (0.0, 0.0);
    for p in parts {
        let (l, w) = p?;
        loss += l;
        wsum += w;
    }
    if wsum == 0.0 {
        return Err(Error::Empty("no validation voxels".into()));
    }
    Ok(loss / wsum)
}

/// Adam on `Σ_n Σ_X w·CE` over all parameter groups.
pub fn train_supervised(
    dataset: &[LabeledScene],
    model: ProbCt,
    cfg: &TrainConfig,
    sensor: &SensorSpec,
) -> Result<TrainOutcome> {
    train_supervised_observed(dataset, model, cfg, sensor, &mut |_, _, _| Ok(()))
}

/// [`train_supervised`] calling `observe(iteration, model, loss)` after
/// every step.
pub fn train_supervised_observed(
    dataset: &[LabeledScene],
    mut model: ProbCt,
    cfg: &TrainConfig,
    sensor: &SensorSpec,
    observe: &mut dyn FnMut(usize, &ProbCt, f64) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(invalid("training set is empty"));
    }
    let spec = model.cfg.posterior;
    let masks: Vec<Vec<usize>> = dataset
        .iter()
        .map(|s| {
            if s.rig.len() != model.cameras {
                return Err(shape(format!("scene has {} cameras, model {}", s.rig.len(), model.cameras)));
            }
            s.images.check_against(&s.rig, None)?;
            let m = scene_mask(s, cfg)?;
            Ok((0..m.len()).filter(|&u| m[u]).collect())
        })
        .collect::<Result<_>>()?;
    if masks.iter().all(|m| m.is_empty()) {
        return Err(invalid("every training mask is empty"));
    }
    let adam = AdamConfig {
        lr: cfg.lr_supervised,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut losses = Vec::with_capacity(cfg.iterations);
    let nc = model.cameras;
    for it in 0..cfg.iterations {
        let mut tape: Tape<f32> = Tape::new();
        let mut us = Vec::new();
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        let per_scene = cfg.voxels_per_iteration.div_ceil(cfg.scenes_per_iteration);
        for _ in 0..cfg.scenes_per_iteration {
            let si = loop {
                let i = rng.random_range(0..dataset.len());
                if !masks[i].is_empty() {
                    break i;
                }
            };
            let s = &dataset[si];
            let m = &masks[si];
            let vox: Vec<usize> = if m.len() <= per_scene {
                m.clone()
            } else {
                let mut v: Vec<usize> = index::sample(&mut rng, m.len(), per_scene).into_iter().map(|i| m[i]).collect();
                v.sort_unstable();
                v
            };
            let mut order: Vec<usize> = (0..nc).collect();
            if cfg.shuffle_cameras {
                order.shuffle(&mut rng);
            }
            let rig = s.rig.subset(&order)?;
            let imgs = s.images.subset(&order)?;
            let pyr = Pyramid::<f32>::new(&imgs, sensor)?;
            let f = model.feature_map(&mut tape, &model.params, &pyr, &|_| true);
            let u = model.query(&mut tape, &model.params, &pyr, f, &rig, &s.field.grid, &vox, &|_| true);
            us.push(u);
            for &v in &vox {
                let b = s.field.beta[v];
                targets.push(spec.bin_of(b) as u32);
                weights.push(cloud_weight(b, &spec, cfg));
            }
        }
        let u = if us.len() == 1 { us[0] } else { tape.stack(&us) };
        let logits = model.decoder(&mut tape, &model.params, u, &|_| true);
        let ce = tape.weighted_ce(logits, &targets, &weights);
        let total = tape.value(ce).data[0] as f64;
        let wsum: f64 = weights.iter().sum();
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("supervised loss at iteration {it}")));
        }
        tape.backward(ce);
        let grads = tape.param_grads(&model.params);
        model.params.adam_step(&grads, &adam, |_| true)?;
        losses.push(total / wsum);
        observe(it, &model, total / wsum)?;
    }
    Ok(TrainOutcome { model, losses })
}

/// Outcome of self-supervised refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTrainOutcome {
    /// Model with the lowest rendering cost seen.
    pub model: ProbCt,
    /// Total rendering cost `E` before each step, then after the last one.
    pub costs: Vec<f64>,
    pub best_cost: f64,
}

/// Physics settings used by self-supervised refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderSetup {
    pub optics: MediumOptics,
    pub air: AirProfile,
    pub rt: RTConfig,
}

/// Refines only the decoder by descending the rendering cost
/// `E = Σ ‖y − F(β̂)‖²`, with β̂ the smoothmax estimate of every masked voxel.
/// Encoder outputs are computed once, so the encoder is untouched.
pub fn train_selfsupervised(
    sets: &[UnlabeledScene],
    mut model: ProbCt,
    cfg: &TrainConfig,
    sensor: &SensorSpec,
    physics: &RenderSetup,
    iterations: usize,
) -> Result<SelfTrainOutcome> {
    cfg.validate()?;
    if sets.is_empty() {
        return Err(invalid("self-supervised set is empty"));
    }
    let cached = encode_sets(&model, sets, sensor)?;
    let adam = AdamConfig {
        lr: cfg.lr_selfsupervised,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    };
    let train = |g: Group| g == Group::Decoder;
    // A new objective starts from a fresh optimizer state.
    model.params.reset_moments(train);
    let mut costs = Vec::with_capacity(iterations + 1);
    let mut best = (f64::INFINITY, model.clone());
    for it in 0..=iterations {
        let (total, grads) = rendering_cost(&model, sets, &cached, physics, it < iterations)?;
        costs.push(total);
        if total < best.0 {
            best = (total, model.clone());
        }
        if let Some(g) = grads {
            // Rendering costs are tiny in radiance units; rescale so Adam's
            // eps stays negligible.
            let scale = 1.0 / costs[0].max(f64::MIN_POSITIVE);
            let g: Vec<Vec<f32>> = g
                .into_iter()
                .map(|b| b.into_iter().map(|x| (x as f64 * scale) as f32).collect())
                .collect();
            model.params.adam_step(&g, &adam, train)?;
        }
    }
    Ok(SelfTrainOutcome {
        model: best.1,
        costs,
        best_cost: best.0,
    })
}

/// Rendering cost `E` of the smoothmax estimates over all sets and its
/// gradient per parameter block; only decoder blocks are non-zero.
pub fn rendering_cost_grad(
    model: &ProbCt,
    sets: &[UnlabeledScene],
    sensor: &SensorSpec,
    physics: &RenderSetup,
) -> Result<(f64, Vec<Vec<f32>>)> {
    let cached = encode_sets(model, sets, sensor)?;
    let (e, g) = rendering_cost(model, sets, &cached, physics, true)?;
    let g = g.unwrap_or_else(|| model.params.blocks().iter().map(|b| vec![0.0; b.data.len()]).collect());
    Ok((e, g))
}

type Cached = (Vec<usize>, Tensor<f32>, ImageSet);

/// Encoder outputs of the masked voxels and the radiance targets of each set.
fn encode_sets(model: &ProbCt, sets: &[UnlabeledScene], sensor: &SensorSpec) -> Result<Vec<Cached>> {
    let mut cached = Vec::with_capacity(sets.len());
    for s in sets {
        if s.mask.len() != s.grid.len() {
            return Err(shape("mask size differs from the grid"));
        }
        if s.rig.len() != model.cameras {
            return Err(shape("scene camera count differs from the model"));
        }
        let vox: Vec<usize> = (0..s.grid.len()).filter(|&u| s.mask[u]).collect();
        let pyr = Pyramid::<f32>::new(&s.images, sensor)?;
        let mut tape = Tape::new();
        let f = model.feature_map(&mut tape, &model.params, &pyr, &|_| false);
        let u = model.query(&mut tape, &model.params, &pyr, f, &s.rig, &s.grid, &vox, &|_| false);
        let target = s.images.to_radiance(sensor)?;
        cached.push((vox, tape.value(u).clone(), target));
    }
    Ok(cached)
}

/// Total rendering cost of the smoothmax estimates and, if asked, its
/// gradient with respect to every parameter block (decoder only non-zero).
fn rendering_cost(
    model: &ProbCt,
    sets: &[UnlabeledScene],
    cached: &[Cached],
    physics: &RenderSetup,
    want_grad: bool,
) -> Result<(f64, Option<Vec<Vec<f32>>>)> {
    let spec = model.cfg.posterior;
    let train = |g: Group| g == Group::Decoder;
    let mut total = 0.0;
    let mut grads: Option<Vec<Vec<f32>>> = None;
    for (s, (vox, u, target)) in sets.iter().zip(cached) {
        let mut tape: Tape<f32> = Tape::new();
        let ui = tape.input(u.clone());
        let logits = model.decoder(&mut tape, &model.params, ui, &train);
        let est = tape.smoothmax(logits, SMOOTHMAX_ALPHA, spec.dbeta);
        let mut beta = vec![0.0; s.grid.len()];
        for (i, &v) in vox.iter().enumerate() {
            beta[v] = tape.value(est).data[i] as f64;
        }
        let field = ExtinctionField::new(s.grid.clone(), beta)?;
        let (e, g) = render_loss_grad(&field, &physics.optics, &physics.air, &s.rig, &physics.rt, target)?;
        if !e.is_finite() || g.grad.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rendering cost".into()));
        }
        total += e;
        if !want_grad || vox.is_empty() {
            continue;
        }
        let seed: Vec<f64> = vox.iter().map(|&v| g.grad[v]).collect();
        tape.backward_with_seed(est, Tensor::from_f64(vox.len(), 1, &seed));
        let pg = tape.param_grads(&model.params);
        match &mut grads {
            None => grads = Some(pg),
            Some(acc) => acc
                .iter_mut()
                .zip(&pg)
                .for_each(|(a, b)| a.iter_mut().zip(b).for_each(|(x, y)| *x += *y)),
        }
    }
    Ok((total, grads))
}
