//! One unknown voxel in a frozen cloud, imaged by rigs of different sizes,
//! compared against the brute-force Bayes posterior.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sct_core::math::Vec3;
use sct_core::oracle::{beta_grid, density_to_bins, kl_divergence, BayesOracle, BimodalPrior, Prior};
use sct_core::par;
use sct_core::probct::{PosteriorSpec, ProbCt, ProbCtConfig};
use sct_core::rt::{apply_noise, render, RTConfig};
use sct_core::scene::{AirProfile, Camera, CameraRig, ExtinctionField, MediumOptics, SensorSpec, VoxelGrid};
use sct_core::training::{train_supervised, LabeledScene, TrainConfig};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingleVoxelConfig {
    /// Voxels per axis of the cubic grid.
    pub grid_n: usize,
    pub voxel_m: f64,
    /// Extinction of the occluding wall [km⁻¹].
    pub wall_beta: f64,
    /// Wall thickness in voxels.
    pub wall_voxels: usize,
    pub pixels: usize,
    pub fov_deg: f64,
    /// Horizontal distance of the ring cameras from the grid center [m].
    pub ring_radius_m: f64,
    /// Height of the ring cameras above the grid center [m].
    pub ring_height_m: f64,
    pub sun_zenith_deg: f64,
    pub sun_azimuth_deg: f64,
    pub prior: BimodalPrior,
    pub train_draws: usize,
    pub test_draws: usize,
    pub rt: RTConfig,
    pub sensor: SensorSpec,
    pub model: ProbCtConfig,
    pub train: TrainConfig,
    /// Prior density below which hypotheses are skipped by the oracle.
    pub prior_cutoff: f64,
    pub seed: u64,
}

impl Default for SingleVoxelConfig {
    fn default() -> Self {
        SingleVoxelConfig {
            grid_n: 8,
            voxel_m: 30.0,
            wall_beta: 300.0,
            wall_voxels: 3,
            pixels: 12,
            fov_deg: 80.0,
            ring_radius_m: 300.0,
            ring_height_m: 300.0,
            sun_zenith_deg: 30.0,
            sun_azimuth_deg: 0.0,
            prior: BimodalPrior::default(),
            train_draws: 2000,
            test_draws: 50,
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
                iterations: 8000,
                voxels_per_iteration: 32,
                scenes_per_iteration: 32,
                lr_supervised: 1e-3,
                shuffle_cameras: false,
                ..TrainConfig::default()
            },
            prior_cutoff: 1e-12,
            seed: 0,
        }
    }
}

/// Frozen geometry of the experiment.
#[derive(Debug, Clone)]
pub struct SingleVoxelScene {
    pub base: ExtinctionField,
    pub voxel: usize,
    pub optics: MediumOptics,
    pub air: AirProfile,
}

impl SingleVoxelScene {
    /// Empty grid with an opaque wall one voxel from the `-x` face and the
    /// unknown voxel at the center.
    pub fn new(cfg: &SingleVoxelConfig) -> Result<Self> {
        let n = cfg.grid_n;
        let grid = VoxelGrid::cube(n, cfg.voxel_m, Vec3::new(0.0, 0.0, 500.0))?;
        let mut base = ExtinctionField::zeros(grid.clone());
        for u in 0..grid.len() {
            let [i, _, k] = grid.unflat(u);
            if (1..=cfg.wall_voxels).contains(&i) && k + 1 < n {
                base.beta[u] = cfg.wall_beta;
            }
        }
        let voxel = grid.flat([n / 2, n / 2, n / 2]);
        Ok(SingleVoxelScene {
            base,
            voxel,
            optics: MediumOptics::default(),
            air: AirProfile::default(),
        })
    }

    pub fn with_beta(&self, beta: f64) -> ExtinctionField {
        let mut f = self.base.clone();
        f.beta[self.voxel] = beta;
        f
    }

    /// `count` cameras. One camera sits low behind the wall; more cameras
    /// form an elevated ring that looks over it.
    pub fn rig(&self, cfg: &SingleVoxelConfig, count: usize) -> Result<CameraRig> {
        let c = self.base.grid.center();
        let up = Vec3::new(0.0, 0.0, 1.0);
        let cams = if count == 1 {
            let pos = c + Vec3::new(-cfg.ring_radius_m - cfg.ring_height_m, 0.0, 0.0);
            vec![Camera::look_at(pos, c, up, cfg.fov_deg, cfg.pixels, cfg.pixels)?]
        } else {
            (0..count)
                .map(|k| {
                    let a = k as f64 * 2.0 * std::f64::consts::PI / count as f64;
                    let pos = c + Vec3::new(cfg.ring_radius_m * a.cos(), cfg.ring_radius_m * a.sin(), cfg.ring_height_m);
                    Camera::look_at(pos, c, up, cfg.fov_deg, cfg.pixels, cfg.pixels)
                })
                .collect::<sct_core::Result<Vec<_>>>()?
        };
        Ok(CameraRig::new(
            cams,
            CameraRig::sun_from_angles(cfg.sun_zenith_deg, cfg.sun_azimuth_deg),
            1.0,
        )?)
    }

    /// Noisy labeled scenes for the given draws; only the unknown voxel is
    /// supervised.
    pub fn dataset(&self, cfg: &SingleVoxelConfig, rig: &CameraRig, betas: &[f64], seed: u64) -> Result<Vec<LabeledScene>> {
        let mut mask = vec![false; self.base.len()];
        mask[self.voxel] = true;
        let scenes = par::map(betas.len(), |i| -> Result<LabeledScene> {
            let field = self.with_beta(betas[i]);
            let clean = render(&field, &self.optics, &self.air, rig, &cfg.rt)?;
            let images = apply_noise(&clean, &cfg.sensor, seed.wrapping_add(i as u64))?;
            Ok(LabeledScene {
                field,
                images,
                rig: rig.clone(),
                mask: Some(mask.clone()),
            })
        });
        scenes.into_iter().collect()
    }

    /// Oracle over the half-bin hypothesis grid, limited to where the prior
    /// density exceeds the cutoff.
    pub fn oracle(&self, cfg: &SingleVoxelConfig, rig: &CameraRig, spec: &PosteriorSpec) -> Result<BayesOracle> {
        let betas: Vec<f64> = beta_grid(spec).into_iter().filter(|b| cfg.prior.density(*b) > cfg.prior_cutoff).collect();
        Ok(BayesOracle::new(&self.base, self.voxel, rig, &self.optics, &self.air, &cfg.rt, betas)?)
    }
}

/// Bin probabilities of an oracle density, padded to `spec.q` bins. The
/// density is taken to fall linearly to zero one grid step beyond the
/// hypotheses, matching [`prior_bins`] under the same cutoff.
pub fn oracle_bins(oracle: &BayesOracle, density: &[f64], spec: &PosteriorSpec) -> Vec<f64> {
    let x = &oracle.betas;
    let h = spec.dbeta / 2.0;
    let mut b = Vec::with_capacity(x.len() + 2);
    let mut d = Vec::with_capacity(x.len() + 2);
    if x[0] - h >= 0.0 {
        b.push(x[0] - h);
        d.push(0.0);
    }
    b.extend_from_slice(x);
    d.extend_from_slice(density);
    b.push(x[x.len() - 1] + h);
    d.push(0.0);
    density_to_bins(&b, &d, spec)
}

/// Prior probabilities of each bin, with densities below `cutoff` dropped
/// as in the oracle.
pub fn prior_bins<P: Prior>(prior: &P, spec: &PosteriorSpec, cutoff: f64) -> Vec<f64> {
    let betas = beta_grid(spec);
    let dens: Vec<f64> = betas
        .iter()
        .map(|b| prior.density(*b))
        .map(|d| if d > cutoff { d } else { 0.0 })
        .collect();
    density_to_bins(&betas, &dens, spec)
}

/// Per-test-draw diagnostics for one rig.
#[derive(Debug, Clone, Serialize)]
pub struct RigReport {
    pub cameras: usize,
    pub beta_true: Vec<f64>,
    /// `KL(prior ‖ P̂)` per draw.
    pub kl_model_prior: Vec<f64>,
    /// `KL(P_bayes ‖ P̂)` per draw; empty when the oracle was skipped.
    pub kl_model_bayes: Vec<f64>,
    /// Oracle mass within ±3 km⁻¹ of the truth per draw.
    pub bayes_mass_near: Vec<f64>,
    /// `KL(prior ‖ P_bayes)` per draw.
    pub kl_bayes_prior: Vec<f64>,
    pub train_losses: Vec<f64>,
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Draws from the prior with a seeded generator.
pub fn prior_draws(prior: &BimodalPrior, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| prior.sample(&mut rng)).collect()
}

/// Trains a fresh model for one rig and evaluates it on held-out draws.
pub fn run_rig(cfg: &SingleVoxelConfig, cameras: usize, with_oracle: bool) -> Result<RigReport> {
    let scene = SingleVoxelScene::new(cfg)?;
    let rig = scene.rig(cfg, cameras)?;
    let spec = cfg.model.posterior;
    let train_b = prior_draws(&cfg.prior, cfg.train_draws, cfg.seed);
    let test_b = prior_draws(&cfg.prior, cfg.test_draws, cfg.seed ^ 0x5EED_7E57);
    let train = scene.dataset(cfg, &rig, &train_b, cfg.seed.wrapping_mul(31))?;
    let test = scene.dataset(cfg, &rig, &test_b, cfg.seed.wrapping_mul(31).wrapping_add(1 << 40))?;
    let model = ProbCt::new(cfg.model.clone(), cameras, cfg.seed)?;
    let out = train_supervised(&train, model, &cfg.train, &cfg.sensor)?;
    let prior = prior_bins(&cfg.prior, &spec, cfg.prior_cutoff);
    let oracle = if with_oracle { Some(scene.oracle(cfg, &rig, &spec)?) } else { None };
    let mut rep = RigReport {
        cameras,
        beta_true: test_b.clone(),
        kl_model_prior: Vec::new(),
        kl_model_bayes: Vec::new(),
        bayes_mass_near: Vec::new(),
        kl_bayes_prior: Vec::new(),
        train_losses: out.losses.clone(),
    };
    for (s, &b) in test.iter().zip(&test_b) {
        let p = out.model.posteriors(&s.images, &s.rig, &s.field.grid, &cfg.sensor, &[scene.voxel])?;
        rep.kl_model_prior.push(kl_divergence(&prior, &p));
        if let Some(o) = &oracle {
            let dens = o.posterior(&|x| cfg.prior.density(x), Some(&s.images), &cfg.sensor)?;
            let bins = oracle_bins(o, &dens, &spec);
            rep.kl_model_bayes.push(kl_divergence(&bins, &p));
            rep.kl_bayes_prior.push(kl_divergence(&prior, &bins));
            rep.bayes_mass_near.push(mass_near(o, &dens, b, 3.0));
        }
    }
    Ok(rep)
}

/// Trapezoid mass of a density on `[b − r, b + r]`, with linear interpolation
/// at the interval ends.
pub fn mass_near(o: &BayesOracle, dens: &[f64], b: f64, r: f64) -> f64 {
    let (lo, hi) = (b - r, b + r);
    let x = &o.betas;
    let mut m = 0.0;
    for i in 0..x.len() - 1 {
        let (a, c) = (x[i].max(lo), x[i + 1].min(hi));
        if c <= a {
            continue;
        }
        let f = |t: f64| dens[i] + (dens[i + 1] - dens[i]) * (t - x[i]) / (x[i + 1] - x[i]);
        m += 0.5 * (c - a) * (f(a) + f(c));
    }
    m
}
