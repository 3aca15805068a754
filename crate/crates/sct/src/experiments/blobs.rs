//! Procedural blob clouds: supervised training on one class, the
//! error-versus-entropy relation on held-out scenes of that class, and
//! self-supervised refinement on a denser class.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sct_core::math::Vec3;
use sct_core::oracle::{gen_blob_class, BlobCloudClass, ImagingSetup};
use sct_core::probct::{map_estimate, normalized_entropy, ProbCt, ProbCtConfig};
use sct_core::rt::RTConfig;
use sct_core::scene::{AirProfile, MediumOptics, SensorSpec, VoxelGrid};
use sct_core::training::{
    scene_mask, train_selfsupervised, train_supervised, LabeledScene, RenderSetup, TrainConfig, UnlabeledScene,
};

use crate::config::RigConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobsConfig {
    pub grid: VoxelGrid,
    pub rig: RigConfig,
    pub rt: RTConfig,
    pub sensor: SensorSpec,
    pub model: ProbCtConfig,
    pub train: TrainConfig,
    /// In-distribution class used for training and testing.
    pub id_class: BlobCloudClass,
    /// Class with a shifted extinction range for refinement.
    pub ood_class: BlobCloudClass,
    pub train_scenes: usize,
    pub test_scenes: usize,
    /// Upper bound on the test voxels sampled from the carve masks.
    pub test_voxels: usize,
    pub ood_scenes: usize,
    pub selftrain_iterations: usize,
    pub seed: u64,
}

impl Default for BlobsConfig {
    fn default() -> Self {
        BlobsConfig {
            grid: VoxelGrid::cube(12, 40.0, Vec3::new(0.0, 0.0, 500.0)).expect("valid constant grid"),
            rig: RigConfig::default(),
            rt: RTConfig {
                max_order: 3,
                n_mu: 4,
                n_phi: 8,
                ..RTConfig::default()
            },
            sensor: SensorSpec::default(),
            model: ProbCtConfig {
                decoder_width: 128,
                decoder_layers: 4,
                ..ProbCtConfig::default()
            },
            train: TrainConfig {
                iterations: 2000,
                voxels_per_iteration: 256,
                scenes_per_iteration: 4,
                lr_supervised: 1e-3,
                lr_selfsupervised: 1e-3,
                ..TrainConfig::default()
            },
            id_class: BlobCloudClass::default(),
            ood_class: BlobCloudClass {
                name: "cumulus-dense".into(),
                peak_beta: [60.0, 140.0],
                seed: 1,
                ..BlobCloudClass::default()
            },
            train_scenes: 100,
            test_scenes: 10,
            test_voxels: 3000,
            ood_scenes: 2,
            selftrain_iterations: 40,
            seed: 0,
        }
    }
}

impl BlobsConfig {
    fn imaging(&self) -> Result<ImagingSetup> {
        Ok(ImagingSetup {
            rig: self.rig.build(&self.grid)?,
            sensor: self.sensor,
            optics: MediumOptics::default(),
            air: AirProfile::default(),
            rt: self.rt.clone(),
        })
    }

    /// Scenes `offset..offset+count` of a class; the class seed is shifted
    /// by the run seed.
    pub fn scenes(&self, class: &BlobCloudClass, offset: usize, count: usize) -> Result<Vec<LabeledScene>> {
        let mut c = class.clone();
        c.seed = c.seed.wrapping_add(self.seed);
        let all = gen_blob_class(&c, offset + count, &self.grid, &self.imaging()?)?;
        Ok(all.into_iter().skip(offset).collect())
    }
}

/// Supervised model trained on the in-distribution class.
pub fn train_id(cfg: &BlobsConfig) -> Result<(ProbCt, Vec<f64>)> {
    let data = cfg.scenes(&cfg.id_class, 0, cfg.train_scenes)?;
    let model = ProbCt::new(cfg.model.clone(), cfg.rig.cameras, cfg.seed)?;
    let out = train_supervised(&data, model, &cfg.train, &cfg.sensor)?;
    Ok((out.model, out.losses))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecileReport {
    pub voxels: usize,
    /// Mean absolute MAP error of the lowest-entropy tenth [km⁻¹].
    pub bottom_error: f64,
    /// Mean absolute MAP error of the highest-entropy tenth [km⁻¹].
    pub top_error: f64,
    pub bottom_entropy: f64,
    pub top_entropy: f64,
}

impl DecileReport {
    pub fn ratio(&self) -> f64 {
        self.top_error / self.bottom_error
    }
}

/// MAP error against normalized entropy on held-out in-distribution scenes,
/// over voxels sampled from their carve masks.
pub fn error_vs_entropy(cfg: &BlobsConfig, model: &ProbCt) -> Result<DecileReport> {
    let test = cfg.scenes(&cfg.id_class, cfg.train_scenes, cfg.test_scenes)?;
    let spec = model.cfg.posterior;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for s in &test {
        let m = scene_mask(s, &cfg.train)?;
        let vox: Vec<usize> = (0..m.len()).filter(|&u| m[u]).collect();
        let probs = model.posteriors(&s.images, &s.rig, &s.field.grid, &cfg.sensor, &vox)?;
        for (i, &u) in vox.iter().enumerate() {
            let p = &probs[i * spec.q..(i + 1) * spec.q];
            let err = (map_estimate(p, spec.dbeta) - s.field.beta[u]).abs();
            pairs.push((normalized_entropy(p), err));
        }
    }
    if pairs.len() > cfg.test_voxels {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xDEC1);
        let mut keep: Vec<usize> = index::sample(&mut rng, pairs.len(), cfg.test_voxels).into_vec();
        keep.sort_unstable();
        pairs = keep.into_iter().map(|i| pairs[i]).collect();
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let d = (n / 10).max(1);
    let mean = |v: &[(f64, f64)], f: fn(&(f64, f64)) -> f64| v.iter().map(f).sum::<f64>() / v.len() as f64;
    Ok(DecileReport {
        voxels: n,
        bottom_error: mean(&pairs[..d], |p| p.1),
        top_error: mean(&pairs[n - d..], |p| p.1),
        bottom_entropy: mean(&pairs[..d], |p| p.0),
        top_entropy: mean(&pairs[n - d..], |p| p.0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineReport {
    pub costs: Vec<f64>,
    pub initial_cost: f64,
    pub best_cost: f64,
    /// Whether every encoder parameter kept its exact bits.
    pub encoder_identical: bool,
    pub decoder_changed: bool,
}

impl RefineReport {
    pub fn reduction(&self) -> f64 {
        1.0 - self.best_cost / self.initial_cost
    }
}

/// Self-supervised refinement on out-of-distribution scenes.
pub fn refine_ood(cfg: &BlobsConfig, model: &ProbCt) -> Result<(ProbCt, RefineReport)> {
    let sets: Vec<UnlabeledScene> = cfg
        .scenes(&cfg.ood_class, 0, cfg.ood_scenes)?
        .into_iter()
        .map(|s| {
            let mask = scene_mask(&s, &cfg.train)?;
            Ok(UnlabeledScene {
                grid: s.field.grid,
                images: s.images,
                rig: s.rig,
                mask,
            })
        })
        .collect::<Result<_>>()?;
    let setup = RenderSetup {
        optics: MediumOptics::default(),
        air: AirProfile::default(),
        rt: cfg.rt.clone(),
    };
    let out = train_selfsupervised(&sets, model.clone(), &cfg.train, &cfg.sensor, &setup, cfg.selftrain_iterations)?;
    let bits = |m: &ProbCt, enc: bool| -> Vec<u32> {
        m.params
            .blocks()
            .iter()
            .filter(|b| b.group.is_encoder() == enc)
            .flat_map(|b| b.data.iter().map(|x| x.to_bits()))
            .collect()
    };
    let rep = RefineReport {
        initial_cost: out.costs[0],
        best_cost: out.best_cost,
        encoder_identical: bits(model, true) == bits(&out.model, true),
        decoder_changed: bits(model, false) != bits(&out.model, false),
        costs: out.costs,
    };
    Ok((out.model, rep))
}
