use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sct_core::math::Vec3;
use sct_core::oracle::*;
use sct_core::probct::{PosteriorGrid, PosteriorSpec};
use sct_core::rt::{render, RTConfig};
use sct_core::scene::*;

#[test]
fn bimodal_mode_frequencies_and_means() {
    let p = BimodalPrior::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut n = [0usize; 2];
    let mut s = [0.0f64; 2];
    let draws = 100_000;
    for _ in 0..draws {
        let (m, b) = p.sample_with_mode(&mut rng);
        assert!(b >= 0.0);
        n[m] += 1;
        s[m] += b;
    }
    assert!((n[0] as f64 / draws as f64 - 0.75).abs() < 0.01);
    assert!((n[1] as f64 / draws as f64 - 0.25).abs() < 0.01);
    assert!((s[0] / n[0] as f64 - 42.0).abs() < 0.1);
    assert!((s[1] / n[1] as f64 - 75.0).abs() < 0.1);
}

#[test]
fn bimodal_density_integrates_to_one() {
    let p = BimodalPrior::default();
    let h = 0.01;
    let s: f64 = (0..20_000).map(|i| p.density((i as f64 + 0.5) * h) * h).sum();
    assert!((s - 1.0).abs() < 1e-6, "{s}");
    assert_eq!(p.density(-1.0), 0.0);
    assert!(BimodalPrior { weights: [0.5, 0.6], ..p }.validate().is_err());
}

#[test]
fn lognormal_moments_match_stated_values() {
    let p = LogNormalPrior::default();
    let (m, s) = p.moments();
    assert!((m / 61.0 - 1.0).abs() < 0.05, "mean {m}");
    assert!((s / 15.0 - 1.0).abs() < 0.05, "std {s}");
    // Independent midpoint quadrature of the stated density.
    let raw = |b: f64| 160.0 / b * (-8.0 * ((b / 160.0).ln() + 1.0).powi(2)).exp();
    let h = 0.005;
    let xs: Vec<f64> = (0..100_000).map(|i| (i as f64 + 0.5) * h).collect();
    let z: f64 = xs.iter().map(|&b| raw(b) * h).sum();
    let mq: f64 = xs.iter().map(|&b| b * raw(b) * h).sum::<f64>() / z;
    assert!((mq - m).abs() < 1e-3 * m);
    assert!((p.density(mq) - raw(mq) / z).abs() < 1e-8);
}

#[test]
fn lognormal_sample_moments() {
    let p = LogNormalPrior::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v: Vec<f64> = (0..50_000).map(|_| p.sample(&mut rng)).collect();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let (pm, _) = p.moments();
    assert!((m - pm).abs() < 0.5);
    let back: LogNormalPrior = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    assert_eq!(back, p);
}

fn grid_point(grid: &VoxelGrid, spec: &SphericalCloudSpec, d: f64) -> Shell {
    let _ = grid;
    spec.shell_of(spec.center() + Vec3::new(d, 0.0, 0.0))
}

#[test]
fn sphere_shell_rule() {
    let spec = SphericalCloudSpec::default();
    let grid = SphericalCloudSpec::default_grid();
    assert_eq!(grid_point(&grid, &spec, 0.0), Shell::Core);
    assert_eq!(grid_point(&grid, &spec, 300.0), Shell::Inter);
    assert_eq!(grid_point(&grid, &spec, 550.0), Shell::Outer);
    assert_eq!(grid_point(&grid, &spec, 700.0), Shell::Empty);
    let c = make_spherical_cloud(&spec, 4, &grid).unwrap();
    assert_eq!(c.labels.len(), grid.len());
    let n_core = c.labels.iter().filter(|l| **l == Shell::Core).count();
    assert_eq!(n_core, 8);
    for (u, l) in c.labels.iter().enumerate() {
        let want = match l {
            Shell::Core => c.beta_core,
            Shell::Inter => 190.0,
            Shell::Outer => c.beta_outer,
            Shell::Empty => 0.0,
        };
        assert_eq!(c.field.beta[u], want);
        // Radius-monotone labels.
        let d = (grid.center_of(u) - spec.center()).norm();
        let rank = |s: &Shell| *s as usize;
        assert_eq!(rank(l), [60.0, 500.0, 600.0].iter().filter(|r| d > **r).count());
    }
    assert_eq!(make_spherical_cloud(&spec, 4, &grid).unwrap(), c);
    let bad = SphericalCloudSpec { radii_m: [60.0, 50.0, 600.0], ..spec };
    assert!(make_spherical_cloud(&bad, 0, &grid).is_err());
}

#[test]
fn shell_average_examples() {
    let grid = VoxelGrid::cube(2, 1.0, Vec3::ZERO).unwrap();
    let spec = PosteriorSpec { q: 8, dbeta: 1.0 };
    let mut probs = vec![0.0; 16];
    probs[3] = 1.0;
    probs[8 + 5] = 1.0;
    let pg = PosteriorGrid::new(spec, grid, vec![0, 1], probs).unwrap();
    let mut labels = vec![Shell::Empty; 8];
    labels[0] = Shell::Core;
    labels[1] = Shell::Core;
    let a = shell_average_posterior(&pg, &labels, Shell::Core).unwrap();
    assert_eq!(a, vec![0.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0]);
    assert!(shell_average_posterior(&pg, &labels, Shell::Outer).is_err());
    labels[1] = Shell::Outer;
    assert_eq!(shell_average_posterior(&pg, &labels, Shell::Core).unwrap()[3], 1.0);
}

struct Small {
    base: ExtinctionField,
    voxel: usize,
    rig: CameraRig,
    rt: RTConfig,
}

fn small() -> Small {
    let grid = VoxelGrid::cube(3, 30.0, Vec3::ZERO).unwrap();
    let mut base = ExtinctionField::uniform(grid.clone(), 20.0).unwrap();
    let voxel = grid.flat([1, 1, 1]);
    base.beta[voxel] = 0.0;
    let c = grid.center();
    let cams = (0..5)
        .map(|k| {
            let a = k as f64 * 1.2566;
            let pos = c + Vec3::new(200.0 * a.cos(), 200.0 * a.sin(), 150.0);
            Camera::look_at(pos, c, Vec3::new(0.0, 0.0, 1.0), 30.0, 16, 16).unwrap()
        })
        .collect();
    let rig = CameraRig::new(cams, CameraRig::sun_from_angles(20.0, 40.0), 1.0).unwrap();
    let rt = RTConfig {
        max_order: 2,
        n_mu: 4,
        n_phi: 6,
        ..RTConfig::default()
    };
    Small { base, voxel, rig, rt }
}

fn noiseless_graylevels(field: &ExtinctionField, s: &Small, sensor: &SensorSpec) -> ImageSet {
    let r = render(field, &MediumOptics::default(), &AirProfile::vacuum(), &s.rig, &s.rt).unwrap();
    let k = sensor.peak_electrons() / r.max();
    let data = r.data.iter().map(|im| im.iter().map(|v| v * k / sensor.gain).collect()).collect();
    ImageSet::new(ImageUnits::Graylevel, r.widths.clone(), r.heights.clone(), data, Some(k)).unwrap()
}

#[test]
fn bayes_without_data_is_the_prior() {
    let s = small();
    let spec = PosteriorSpec { q: 120, dbeta: 1.0 };
    let prior = BimodalPrior::default();
    let (b, p) = bayes_posterior(
        &s.base,
        s.voxel,
        &|x| prior.density(x),
        None,
        &SensorSpec::default(),
        &MediumOptics::default(),
        &AirProfile::vacuum(),
        &s.rt,
        &spec,
    )
    .unwrap();
    assert_eq!(b, beta_grid(&spec));
    assert_eq!(b.len(), 241);
    assert_eq!(b[1], 0.5);
    let z: f64 = b.windows(2).zip(p.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum();
    assert!((z - 1.0).abs() < 1e-10);
    // The prior has negligible mass beyond 120, so the grid density equals it.
    for (x, v) in b.iter().zip(&p) {
        assert!((v - prior.density(*x)).abs() < 1e-6);
    }
    let bins = density_to_bins(&b, &p, &spec);
    assert!((bins.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((bins[42] - 0.75 * 0.0796).abs() < 0.01);
}

#[test]
fn bayes_concentrates_with_tiny_noise() {
    let s = small();
    let spec = PosteriorSpec { q: 60, dbeta: 1.0 };
    let sensor = SensorSpec {
        readout_std: 1e-3,
        ..SensorSpec::default()
    };
    let truth = 37.0;
    let mut f = s.base.clone();
    f.beta[s.voxel] = truth;
    let obs = noiseless_graylevels(&f, &s, &sensor);
    let oracle = BayesOracle::new(
        &s.base,
        s.voxel,
        &s.rig,
        &MediumOptics::default(),
        &AirProfile::vacuum(),
        &s.rt,
        beta_grid(&spec),
    )
    .unwrap();
    let flat = |_: f64| 1.0;
    let p = oracle.posterior(&flat, Some(&obs), &sensor).unwrap();
    let z: f64 = oracle.betas.windows(2).zip(p.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum();
    assert!((z - 1.0).abs() < 1e-10);
    let bins = density_to_bins(&oracle.betas, &p, &spec);
    let near: f64 = bins[36..=38].iter().sum();
    assert!(near > 0.99, "mass near truth {near}");
}

#[test]
fn kl_examples() {
    let p = [0.5, 0.5, 0.0];
    assert_eq!(kl_divergence(&p, &p), 0.0);
    assert!((kl_divergence(&p, &[0.25, 0.25, 0.5]) - 2f64.ln()).abs() < 1e-12);
    assert!(kl_divergence(&p, &[1.0, 0.0, 0.0]).is_infinite());
}

fn setup(grid: &VoxelGrid) -> ImagingSetup {
    let c = grid.center();
    let cams = (0..3)
        .map(|k| {
            let a = k as f64 * 2.1;
            let pos = c + Vec3::new(300.0 * a.cos(), 300.0 * a.sin(), 250.0);
            Camera::look_at(pos, c, Vec3::new(0.0, 0.0, 1.0), 30.0, 6, 6).unwrap()
        })
        .collect();
    ImagingSetup {
        rig: CameraRig::new(cams, CameraRig::sun_from_angles(20.0, 0.0), 1.0).unwrap(),
        sensor: SensorSpec::default(),
        optics: MediumOptics::default(),
        air: AirProfile::default(),
        rt: RTConfig {
            max_order: 2,
            n_mu: 2,
            n_phi: 4,
            ..RTConfig::default()
        },
    }
}

#[test]
fn blob_class_is_deterministic_and_bounded() {
    let grid = VoxelGrid::cube(6, 40.0, Vec3::ZERO).unwrap();
    let class = BlobCloudClass {
        seed: 11,
        ..BlobCloudClass::default()
    };
    let st = setup(&grid);
    assert!(gen_blob_class(&class, 0, &grid, &st).unwrap().is_empty());
    let a = gen_blob_class(&class, 3, &grid, &st).unwrap();
    let b = gen_blob_class(&class, 3, &grid, &st).unwrap();
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.field, y.field);
        assert_eq!(x.images, y.images);
        assert!(x.field.beta.iter().all(|v| *v >= 0.0 && *v <= class.peak_beta[1]));
        assert!(x.field.max() > 0.0);
    }
    assert_ne!(a[0].field, a[1].field);
    // Scene i does not depend on how many scenes are generated.
    let c = gen_blob_class(&class, 1, &grid, &st).unwrap();
    assert_eq!(c[0].field, a[0].field);
    let bad = BlobCloudClass { blobs: [3, 2], ..class };
    assert!(gen_blob_class(&bad, 1, &grid, &st).is_err());
}
