//! Three-part spherical clouds: a veiled core behind an opaque shell and a
//! directly visible outer shell, both with log-normal extinction.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sct_core::oracle::{kl_divergence, make_spherical_cloud, shell_average_posterior, Shell, SphericalCloud, SphericalCloudSpec};
use sct_core::par;
use sct_core::probct::{map_estimate, normalized_entropy, PosteriorGrid, PosteriorSpec, ProbCt, ProbCtConfig};
use sct_core::rt::{apply_noise, render, RTConfig};
use sct_core::scene::{AirProfile, CameraRig, MediumOptics, SensorSpec, VoxelGrid};
use sct_core::training::{dataset_loss, train_supervised_observed, LabeledScene, TrainConfig};

use super::single_voxel::prior_bins;
use crate::config::RigConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpheresConfig {
    pub sphere: SphericalCloudSpec,
    pub grid: VoxelGrid,
    pub rig: RigConfig,
    pub rt: RTConfig,
    pub sensor: SensorSpec,
    pub model: ProbCtConfig,
    pub train: TrainConfig,
    pub train_spheres: usize,
    /// Held-out spheres whose loss selects the returned checkpoint.
    pub validation_spheres: usize,
    pub validate_every: usize,
    pub test_spheres: usize,
    /// Supervised voxels drawn per non-core part and sphere; every core voxel
    /// is supervised.
    pub voxels_per_part: usize,
    pub seed: u64,
}

impl Default for SpheresConfig {
    fn default() -> Self {
        SpheresConfig {
            sphere: SphericalCloudSpec::default(),
            grid: SphericalCloudSpec::default_grid(),
            rig: RigConfig {
                cameras: 10,
                radius_m: 1500.0,
                height_m: 1500.0,
                fov_deg: 40.0,
                pixels: 16,
                ..RigConfig::default()
            },
            rt: RTConfig {
                max_order: 2,
                n_mu: 2,
                n_phi: 4,
                ..RTConfig::default()
            },
            sensor: SensorSpec::default(),
            model: ProbCtConfig {
                posterior: PosteriorSpec { q: 61, dbeta: 5.0 },
                decoder_width: 128,
                decoder_layers: 4,
                ..ProbCtConfig::default()
            },
            train: TrainConfig {
                iterations: 4000,
                voxels_per_iteration: 256,
                scenes_per_iteration: 8,
                lr_supervised: 1e-3,
                weight_decay: 0.15,
                ..TrainConfig::default()
            },
            train_spheres: 200,
            validation_spheres: 20,
            validate_every: 100,
            test_spheres: 20,
            voxels_per_part: 64,
            seed: 0,
        }
    }
}

/// Per-test-sphere diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SpheresReport {
    pub beta_core: Vec<f64>,
    pub beta_outer: Vec<f64>,
    /// `KL(prior ‖ ⟨P̂_core⟩)`.
    pub kl_core_prior: Vec<f64>,
    /// MAP of `⟨P̂_outer⟩`.
    pub outer_map: Vec<f64>,
    /// `|MAP − β_outer| / β_outer`.
    pub outer_rel_err: Vec<f64>,
    /// Normalized entropy of `⟨P̂_outer⟩`.
    pub outer_entropy: Vec<f64>,
    pub train_losses: Vec<f64>,
    /// Iteration count of the selected checkpoint.
    pub best_iteration: usize,
}

fn imaged(cfg: &SpheresConfig, rig: &CameraRig, count: usize, seed: u64) -> Result<Vec<(SphericalCloud, LabeledScene)>> {
    let optics = MediumOptics::default();
    let air = AirProfile::default();
    let out = par::map(count, |i| -> Result<(SphericalCloud, LabeledScene)> {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let cloud = make_spherical_cloud(&cfg.sphere, s, &cfg.grid)?;
        let clean = render(&cloud.field, &optics, &air, rig, &cfg.rt)?;
        let images = apply_noise(&clean, &cfg.sensor, s ^ 0xA5A5_5A5A)?;
        let mut mask = vec![false; cloud.labels.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        for part in [Shell::Core, Shell::Inter, Shell::Outer, Shell::Empty] {
            let idx: Vec<usize> = (0..mask.len()).filter(|&u| cloud.labels[u] == part).collect();
            let take = if part == Shell::Core { idx.len() } else { cfg.voxels_per_part.min(idx.len()) };
            for j in index::sample(&mut rng, idx.len(), take) {
                mask[idx[j]] = true;
            }
        }
        let scene = LabeledScene {
            field: cloud.field.clone(),
            images,
            rig: rig.clone(),
            mask: Some(mask),
        };
        Ok((cloud, scene))
    });
    out.into_iter().collect()
}

/// Trains on `train_spheres` spheres, keeps the checkpoint with the lowest
/// validation loss and reports shell-averaged posteriors on `test_spheres`
/// held-out ones.
pub fn run_spheres(cfg: &SpheresConfig) -> Result<SpheresReport> {
    let rig = cfg.rig.build(&cfg.grid)?;
    let spec = cfg.model.posterior;
    let train: Vec<LabeledScene> = imaged(cfg, &rig, cfg.train_spheres, cfg.seed)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let val: Vec<LabeledScene> = imaged(cfg, &rig, cfg.validation_spheres, cfg.seed ^ 0x7A11)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let test = imaged(cfg, &rig, cfg.test_spheres, cfg.seed ^ 0x7E57)?;
    let model = ProbCt::new(cfg.model.clone(), rig.len(), cfg.seed)?;
    let mut best: Option<(f64, usize, ProbCt)> = None;
    let every = cfg.validate_every.max(1);
    let out = train_supervised_observed(&train, model, &cfg.train, &cfg.sensor, &mut |it, m, _| {
        let done = it + 1;
        if val.is_empty() || (done % every != 0 && done != cfg.train.iterations) {
            return Ok(());
        }
        let l = dataset_loss(m, &val, &cfg.train, &cfg.sensor)?;
        if best.as_ref().is_none_or(|(b, _, _)| l < *b) {
            best = Some((l, done, m.clone()));
        }
        Ok(())
    })?;
    let (best_iteration, model) = match best {
        Some((_, it, m)) => (it, m),
        None => (cfg.train.iterations, out.model),
    };
    let prior = prior_bins(&cfg.sphere.prior, &spec, 0.0);
    let mut rep = SpheresReport {
        beta_core: Vec::new(),
        beta_outer: Vec::new(),
        kl_core_prior: Vec::new(),
        outer_map: Vec::new(),
        outer_rel_err: Vec::new(),
        outer_entropy: Vec::new(),
        train_losses: out.losses,
        best_iteration,
    };
    for (cloud, scene) in &test {
        let vox: Vec<usize> = (0..cloud.labels.len())
            .filter(|&u| matches!(cloud.labels[u], Shell::Core | Shell::Outer))
            .collect();
        let probs = model.posteriors(&scene.images, &rig, &cfg.grid, &cfg.sensor, &vox)?;
        let pg = PosteriorGrid::new(spec, cfg.grid.clone(), vox.iter().map(|u| *u as u32).collect(), probs)?;
        let core = shell_average_posterior(&pg, &cloud.labels, Shell::Core)?;
        let outer = shell_average_posterior(&pg, &cloud.labels, Shell::Outer)?;
        let map = map_estimate(&outer, spec.dbeta);
        rep.beta_core.push(cloud.beta_core);
        rep.beta_outer.push(cloud.beta_outer);
        rep.kl_core_prior.push(kl_divergence(&prior, &core));
        rep.outer_map.push(map);
        rep.outer_rel_err.push((map - cloud.beta_outer).abs() / cloud.beta_outer);
        rep.outer_entropy.push(normalized_entropy(&outer));
    }
    Ok(rep)
}
