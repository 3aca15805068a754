//! Subcommands of the `sct` binary. Each returns a JSON summary and writes
//! its artifacts under `--out`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use sct_core::adjoint::solve_physics;
use sct_core::math::Vec3;
use sct_core::oracle::{beta_grid, gen_blob_class, kl_divergence, BayesOracle, Prior};
use sct_core::probct::{infer_scene, normalized_entropy, ProbCt};
use sct_core::products::{
    adiabatic_fraction, af_histogram, core_re_profile, epsilon_delta, lwc_from_re_field, pv_relative_response,
};
use sct_core::rt::{apply_noise, render};
use sct_core::scene::{CameraRig, ExtinctionField, ImageSet, ImageUnits, VoxelGrid};
use sct_core::training::{
    space_carve, train_selfsupervised, train_supervised_observed, LabeledScene, RenderSetup, UnlabeledScene,
};

use crate::config::RunConfig;
use crate::error::{io_err, CliError, Result};
use crate::formats::*;
use crate::experiments::single_voxel::oracle_bins;

#[derive(Debug, Parser)]
#[command(name = "sct", version, about = "Scattering tomography of cloud fields")]
pub struct Cli {
    /// JSON run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate labeled scenes of a cloud class with their noisy images.
    GenScenes {
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Render images of an extinction field.
    Render {
        #[arg(long)]
        scene: PathBuf,
        /// Camera rig; built from the configuration when absent.
        #[arg(long)]
        rig: Option<PathBuf>,
        /// Write radiance instead of noisy graylevels.
        #[arg(long)]
        clean: bool,
    },
    /// Space-carve a cloud mask from images.
    Carve {
        #[command(flatten)]
        obs: Observation,
        /// Any volume file on the target grid; the configured grid otherwise.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Supervised training on a generated scene directory.
    Train {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
        /// Also write a checkpoint every this many iterations.
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// Continue from a checkpoint instead of a fresh model.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Self-supervised refinement of the decoder on unlabeled images.
    Selftrain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Per-voxel posteriors and derived volumes.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        obs: Observation,
        /// Voxels to query; carved from the images when absent.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Iterative physics-based reconstruction.
    SolvePhysics {
        #[command(flatten)]
        obs: Observation,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Initial extinction of every masked voxel [km⁻¹].
        #[arg(long, default_value_t = 10.0)]
        init: f64,
    },
    /// Reconstruction error of an estimate against the truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Adds uncertainty statistics of a posterior file.
        #[arg(long)]
        posterior: Option<PathBuf>,
    },
    /// Microphysics and solar-energy products of a reconstruction.
    Products {
        #[arg(long)]
        estimate: PathBuf,
        /// Posterior STD volume; enables the PV response map.
        #[arg(long)]
        std: Option<PathBuf>,
        /// Effective-radius volume [µm]; enables the adiabatic-fraction histogram.
        #[arg(long)]
        re: Option<PathBuf>,
        #[arg(long)]
        rig: Option<PathBuf>,
    },
    /// Brute-force Bayes posterior of one voxel with the rest of the field fixed.
    Oracle {
        #[arg(long)]
        scene: PathBuf,
        /// Voxel index as `i,j,k`.
        #[arg(long, value_parser = parse_voxel)]
        voxel: [usize; 3],
        #[command(flatten)]
        obs: Observation,
        /// Model whose posterior is listed next to the oracle.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Observation {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub rig: PathBuf,
}

fn parse_voxel(s: &str) -> std::result::Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|_| "expected three comma-separated indices".to_string())
}

/// Loads the configuration, applies the flags and runs the subcommand on a
/// pool of the requested size.
pub fn run(cli: Cli) -> Result<Value> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.workers == Some(0) {
        return Err(CliError::Usage("--workers must be >= 1".into()));
    }
    let ctx = Ctx { cfg, out: cli.out };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| ctx.dispatch(cli.command))
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn scene_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == ext)
                && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("scene_"))
        })
        .collect();
    v.sort();
    if v.is_empty() {
        return Err(CliError::Usage(format!("{}: no scene_*.{ext} files", dir.display())));
    }
    Ok(v)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(io_err(d))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn series_csv(header: &str, values: &[f64]) -> String {
    let mut s = format!("{header}\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{i},{v}");
    }
    s
}

impl Ctx {
    fn out(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).map_err(io_err(&self.out))?;
        Ok(self.out.join(name))
    }

    fn grid_from(&self, file: Option<&Path>) -> Result<VoxelGrid> {
        match file {
            Some(p) => Ok(read_volume(p)?.0),
            None => Ok(self.cfg.scene.grid.clone()),
        }
    }

    fn render_setup(&self) -> RenderSetup {
        RenderSetup {
            optics: self.cfg.scene.optics,
            air: self.cfg.scene.air.clone(),
            rt: self.cfg.rt.clone(),
        }
    }

    fn carve(&self, images: &ImageSet, rig: &CameraRig, grid: &VoxelGrid) -> Result<Vec<bool>> {
        let t = &self.cfg.train;
        Ok(space_carve(images, rig, grid, t.carve_fraction * images.max(), t.carve_agreement)?)
    }

    fn dispatch(&self, cmd: Command) -> Result<Value> {
        match cmd {
            Command::GenScenes { class, count } => self.gen_scenes(&class, count),
            Command::Render { scene, rig, clean } => self.render(&scene, rig.as_deref(), clean),
            Command::Carve { obs, grid } => self.carve_cmd(&obs, grid.as_deref()),
            Command::Train {
                scenes,
                iterations,
                checkpoint_every,
                init,
            } => self.train(&scenes, iterations, checkpoint_every, init.as_deref()),
            Command::Selftrain {
                checkpoint,
                scenes,
                iterations,
            } => self.selftrain(&checkpoint, &scenes, iterations),
            Command::Infer {
                checkpoint,
                obs,
                mask,
                grid,
            } => self.infer(&checkpoint, &obs, mask.as_deref(), grid.as_deref()),
            Command::SolvePhysics { obs, mask, grid, init } => {
                self.solve_physics(&obs, mask.as_deref(), grid.as_deref(), init)
            }
            Command::Eval {
                truth,
                estimate,
                posterior,
            } => self.eval(&truth, &estimate, posterior.as_deref()),
            Command::Products { estimate, std, re, rig } => {
                self.products(&estimate, std.as_deref(), re.as_deref(), rig.as_deref())
            }
            Command::Oracle {
                scene,
                voxel,
                obs,
                checkpoint,
            } => self.oracle(&scene, voxel, &obs, checkpoint.as_deref()),
        }
    }

    fn gen_scenes(&self, name: &str, count: usize) -> Result<Value> {
        let mut class = self.cfg.scene.class(name)?.clone();
        class.seed = class.seed.wrapping_add(self.cfg.seed);
        let grid = &self.cfg.scene.grid;
        let rig = self.cfg.scene.rig.build(grid)?;
        let scenes = gen_blob_class(&class, count, grid, &self.cfg.imaging(rig.clone()))?;
        let rig_path = self.out("rig.json")?;
        write_rig(&rig_path, &rig)?;
        let mut files = Vec::new();
        for (i, s) in scenes.iter().enumerate() {
            let f = self.out(&format!("scene_{i:03}.vxg"))?;
            let im = self.out(&format!("scene_{i:03}.imset"))?;
            write_field(&f, &s.field)?;
            write_images(&im, &s.images)?;
            files.push(json!({"field": path_str(&f), "images": path_str(&im), "max_beta": s.field.max()}));
        }
        Ok(json!({"class": name, "count": count, "rig": path_str(&rig_path), "scenes": files}))
    }

    fn render(&self, scene: &Path, rig: Option<&Path>, clean: bool) -> Result<Value> {
        let field = read_field(scene)?;
        let (rig, rig_path) = match rig {
            Some(p) => (read_rig(p)?, p.to_path_buf()),
            None => {
                let r = self.cfg.scene.rig.build(&field.grid)?;
                let p = self.out("rig.json")?;
                write_rig(&p, &r)?;
                (r, p)
            }
        };
        let s = &self.cfg.scene;
        let mut images = render(&field, &s.optics, &s.air, &rig, &self.cfg.rt)?;
        if !clean {
            images = apply_noise(&images, &s.sensor, self.cfg.seed)?;
        }
        let p = self.out("images.imset")?;
        write_images(&p, &images)?;
        Ok(json!({"images": path_str(&p), "rig": path_str(&rig_path), "cameras": rig.len(), "max": images.max()}))
    }

    fn carve_cmd(&self, obs: &Observation, grid: Option<&Path>) -> Result<Value> {
        let images = read_images(&obs.images)?;
        let rig = read_rig(&obs.rig)?;
        let grid = self.grid_from(grid)?;
        let mask = self.carve(&images, &rig, &grid)?;
        let p = self.out("mask.vxg")?;
        write_mask(&p, &grid, &mask)?;
        Ok(json!({"mask": path_str(&p), "voxels": mask.iter().filter(|m| **m).count()}))
    }

    fn labeled(&self, dir: &Path) -> Result<Vec<LabeledScene>> {
        let rig = read_rig(&dir.join("rig.json"))?;
        scene_files(dir, "vxg")?
            .into_iter()
            .map(|f| {
                Ok(LabeledScene {
                    field: read_field(&f)?,
                    images: read_images(&f.with_extension("imset"))?,
                    rig: rig.clone(),
                    mask: None,
                })
            })
            .collect()
    }

    fn train(&self, dir: &Path, iterations: Option<usize>, every: Option<usize>, init: Option<&Path>) -> Result<Value> {
        let data = self.labeled(dir)?;
        let mut tc = self.cfg.train.clone();
        if let Some(n) = iterations {
            tc.iterations = n;
        }
        tc.seed = tc.seed.wrapping_add(self.cfg.seed);
        let model = match init {
            Some(p) => read_checkpoint(p)?,
            None => ProbCt::new(self.cfg.model_config(), data[0].rig.len(), self.cfg.seed)?,
        };
        let mut written = Vec::new();
        let mut observe = |it: usize, m: &ProbCt, _loss: f64| -> sct_core::Result<()> {
            if let Some(k) = every.filter(|k| *k > 0) {
                if (it + 1) % k == 0 && it + 1 < tc.iterations {
                    let p = self.out.join(format!("checkpoint_{:06}.sck", it + 1));
                    write_checkpoint(&p, m).map_err(|e| sct_core::Error::InvalidArgument(e.to_string()))?;
                    written.push(path_str(&p));
                }
            }
            Ok(())
        };
        fs::create_dir_all(&self.out).map_err(io_err(&self.out))?;
        let out = train_supervised_observed(&data, model, &tc, &self.cfg.scene.sensor, &mut observe)?;
        let ck = self.out("model.sck")?;
        write_checkpoint(&ck, &out.model)?;
        written.push(path_str(&ck));
        let csv = self.out("train_loss.csv")?;
        write_text(&csv, &series_csv("iteration,loss", &out.losses))?;
        Ok(json!({
            "iterations": out.losses.len(),
            "final_loss": out.losses.last(),
            "checkpoints": written,
            "losses": path_str(&csv),
        }))
    }

    fn selftrain(&self, ckpt: &Path, dir: &Path, iterations: Option<usize>) -> Result<Value> {
        let model = read_checkpoint(ckpt)?;
        let rig = read_rig(&dir.join("rig.json"))?;
        let grid = match scene_files(dir, "vxg") {
            Ok(f) => read_volume(&f[0])?.0,
            Err(_) => self.cfg.scene.grid.clone(),
        };
        let sets = scene_files(dir, "imset")?
            .into_iter()
            .map(|f| {
                let images = read_images(&f)?;
                let mask = self.carve(&images, &rig, &grid)?;
                Ok(UnlabeledScene {
                    grid: grid.clone(),
                    images,
                    rig: rig.clone(),
                    mask,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = iterations.unwrap_or(self.cfg.train.iterations);
        let out = train_selfsupervised(&sets, model, &self.cfg.train, &self.cfg.scene.sensor, &self.render_setup(), n)?;
        let ck = self.out("model.sck")?;
        write_checkpoint(&ck, &out.model)?;
        let csv = self.out("selftrain_cost.csv")?;
        write_text(&csv, &series_csv("iteration,cost", &out.costs))?;
        Ok(json!({
            "iterations": n,
            "initial_cost": out.costs.first(),
            "best_cost": out.best_cost,
            "checkpoint": path_str(&ck),
        }))
    }

    fn mask_for(&self, mask: Option<&Path>, grid: Option<&Path>, images: &ImageSet, rig: &CameraRig) -> Result<(VoxelGrid, Vec<bool>)> {
        match mask {
            Some(p) => read_mask(p),
            None => {
                let g = self.grid_from(grid)?;
                let m = self.carve(images, rig, &g)?;
                Ok((g, m))
            }
        }
    }

    fn infer(&self, ckpt: &Path, obs: &Observation, mask: Option<&Path>, grid: Option<&Path>) -> Result<Value> {
        let model = read_checkpoint(ckpt)?;
        let images = read_images(&obs.images)?;
        let rig = read_rig(&obs.rig)?;
        let (grid, mask) = self.mask_for(mask, grid, &images, &rig)?;
        let pg = infer_scene(&model, &images, &rig, &grid, &mask, &self.cfg.scene.sensor)?;
        let post = self.out("posterior.pgr")?;
        write_posterior(&post, &pg)?;
        write_field(&self.out("map.vxg")?, &pg.map_field())?;
        write_field(&self.out("mean.vxg")?, &pg.mean_field())?;
        write_volume(&self.out("std.vxg")?, &grid, &pg.std_field())?;
        write_volume(&self.out("entropy.vxg")?, &grid, &pg.entropy_field())?;
        let h: Vec<f64> = (0..pg.len()).map(|i| normalized_entropy(pg.row(i))).collect();
        let mean_h = if h.is_empty() { 0.0 } else { h.iter().sum::<f64>() / h.len() as f64 };
        Ok(json!({"posterior": path_str(&post), "voxels": pg.len(), "mean_entropy": mean_h}))
    }

    fn solve_physics(&self, obs: &Observation, mask: Option<&Path>, grid: Option<&Path>, init: f64) -> Result<Value> {
        let images = read_images(&obs.images)?;
        let rig = read_rig(&obs.rig)?;
        let (grid, mask) = self.mask_for(mask, grid, &images, &rig)?;
        let target = match images.units {
            ImageUnits::Radiance => images,
            ImageUnits::Graylevel => images.to_radiance(&self.cfg.scene.sensor)?,
        };
        let beta = mask.iter().map(|m| if *m { init } else { 0.0 }).collect();
        let start = ExtinctionField::new(grid, beta)?;
        let s = &self.cfg.scene;
        let res = solve_physics(&start, &target, &mask, &s.optics, &s.air, &rig, &self.cfg.rt, &self.cfg.physics)?;
        let est = self.out("estimate.vxg")?;
        write_field(&est, &res.field)?;
        let csv = self.out("physics_loss.csv")?;
        write_text(&csv, &series_csv("iteration,loss", &res.losses))?;
        Ok(json!({
            "estimate": path_str(&est),
            "iterations": res.losses.len().saturating_sub(1),
            "initial_loss": res.losses.first(),
            "final_loss": res.losses.iter().cloned().fold(f64::INFINITY, f64::min),
        }))
    }

    fn eval(&self, truth: &Path, estimate: &Path, posterior: Option<&Path>) -> Result<Value> {
        let t = read_field(truth)?;
        let e = read_field(estimate)?;
        if t.grid != e.grid {
            return Err(CliError::Usage("truth and estimate grids differ".into()));
        }
        let (eps, delta) = epsilon_delta(&t, &e)?;
        let mut v = json!({"epsilon": eps, "delta": delta});
        if let Some(p) = posterior {
            let pg = read_posterior(p)?;
            let h: Vec<f64> = (0..pg.len()).map(|i| normalized_entropy(pg.row(i))).collect();
            let mean = if h.is_empty() { 0.0 } else { h.iter().sum::<f64>() / h.len() as f64 };
            v["voxels"] = json!(pg.len());
            v["mean_entropy"] = json!(mean);
        }
        write_text(&self.out("eval.json")?, &serde_json::to_string_pretty(&v).expect("json"))?;
        Ok(v)
    }

    fn products(&self, estimate: &Path, std: Option<&Path>, re: Option<&Path>, rig: Option<&Path>) -> Result<Value> {
        let pc = &self.cfg.products;
        let mut field = read_field(estimate)?;
        for b in &mut field.beta {
            if *b < pc.cloud_threshold {
                *b = 0.0;
            }
        }
        let g = field.grid.clone();
        let nxy = g.nx * g.ny;
        let base_z = match pc.cloud_base_m {
            Some(z) => z,
            None => (0..g.nz)
                .find(|&k| field.beta[k * nxy..(k + 1) * nxy].iter().any(|b| *b > 0.0))
                .map(|k| g.origin.z + k as f64 * g.dz)
                .ok_or_else(|| CliError::Usage("estimate holds no cloud above the threshold".into()))?,
        };
        let mut summary = json!({"cloud_base_m": base_z});

        let prof = core_re_profile(&field, &pc.adiabatic, &pc.microphysics, base_z)?;
        let mut csv = String::from("z_m,re_um,core_voxels,precipitating\n");
        for s in &prof {
            let _ = writeln!(csv, "{},{},{},{}", s.z, s.re_um, s.core_voxels, s.precipitating);
        }
        let p = self.out("re_profile.csv")?;
        write_text(&p, &csv)?;
        summary["re_profile"] = json!(path_str(&p));
        summary["precipitating_layers"] = json!(prof.iter().filter(|s| s.precipitating).count());

        if let Some(re) = re {
            let (rg, re_um) = read_volume(re)?;
            if rg != g {
                return Err(CliError::Usage("effective-radius grid differs from the estimate".into()));
            }
            let lwc = lwc_from_re_field(&field, &re_um, &pc.microphysics)?;
            let af = adiabatic_fraction(&lwc, &g, &pc.adiabatic, base_z)?;
            let hist = af_histogram(&af, &field, pc.af_bin_m, pc.af_bins)?;
            let mut csv = String::from("r_lo_m,r_hi_m,mean_af,count\n");
            for b in &hist {
                let _ = writeln!(csv, "{},{},{},{}", b.r_lo, b.r_hi, b.mean_af, b.count);
            }
            let p = self.out("af_histogram.csv")?;
            write_text(&p, &csv)?;
            summary["af_histogram"] = json!(path_str(&p));
            summary["super_adiabatic"] = json!(af.super_adiabatic);
        }

        if let Some(sp) = std {
            let (sg, sd) = read_volume(sp)?;
            if sg != g {
                return Err(CliError::Usage("STD grid differs from the estimate".into()));
            }
            let rig = match rig {
                Some(p) => read_rig(p)?,
                None => self.cfg.scene.rig.build(&g)?,
            };
            let points: Vec<Vec3> = (0..g.columns())
                .map(|c| {
                    let p = g.column_floor_point(c);
                    Vec3::new(p.x, p.y, 0.0)
                })
                .collect();
            let s = &self.cfg.scene;
            let rel = pv_relative_response(
                &field, &sd, &points, &rig, &s.optics, &s.air, &pc.pv, &self.cfg.rt, &pc.quadrature,
            )?;
            let ground = VoxelGrid::new([g.nx, g.ny, 1], [g.dx, g.dy, g.dz], Vec3::new(g.origin.x, g.origin.y, 0.0))?;
            let p = self.out("pv_relative.vxg")?;
            write_volume(&p, &ground, &rel)?;
            summary["pv_relative"] = json!(path_str(&p));
            summary["pv_relative_max"] = json!(rel.iter().cloned().fold(0.0, f64::max));
        }
        Ok(summary)
    }

    fn oracle(&self, scene: &Path, voxel: [usize; 3], obs: &Observation, ckpt: Option<&Path>) -> Result<Value> {
        let base = read_field(scene)?;
        let g = &base.grid;
        if voxel[0] >= g.nx || voxel[1] >= g.ny || voxel[2] >= g.nz {
            return Err(CliError::Usage(format!("voxel {voxel:?} lies outside the grid")));
        }
        let u = g.flat(voxel);
        let images = read_images(&obs.images)?;
        let rig = read_rig(&obs.rig)?;
        let oc = &self.cfg.oracle;
        let model = ckpt.map(read_checkpoint).transpose()?;
        let spec = model.as_ref().map_or(self.cfg.posterior, |m| m.cfg.posterior);
        let betas: Vec<f64> = beta_grid(&spec)
            .into_iter()
            .filter(|b| oc.prior.density(*b) > oc.prior_cutoff)
            .collect();
        let s = &self.cfg.scene;
        let o = BayesOracle::new(&base, u, &rig, &s.optics, &s.air, &self.cfg.rt, betas)?;
        let dens = o.posterior(&|b| oc.prior.density(b), Some(&images), &s.sensor)?;
        let p_hat = match &model {
            Some(m) => Some(m.posteriors(&images, &rig, g, &s.sensor, &[u])?),
            None => None,
        };
        let mut csv = String::from("beta,p_true,p_hat\n");
        for (b, d) in o.betas.iter().zip(&dens) {
            let ph = p_hat.as_ref().map_or(f64::NAN, |p| p[spec.bin_of(*b)] / spec.dbeta);
            let _ = writeln!(csv, "{b},{d},{ph}");
        }
        let p = self.out("oracle.csv")?;
        write_text(&p, &csv)?;
        let mut v = json!({"posterior": path_str(&p), "hypotheses": o.betas.len()});
        if let Some(ph) = &p_hat {
            v["kl"] = json!(kl_divergence(&oracle_bins(&o, &dens, &spec), ph));
        }
        Ok(v)
    }
}
