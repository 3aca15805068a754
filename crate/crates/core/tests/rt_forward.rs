use sct_core::math::{Vec3, PI};
use sct_core::rt::{
    apply_noise, apply_noise_with_scale, log_likelihood, pixel_likelihood, render, solve_rt, transmittance, RTConfig,
};
use sct_core::scene::{
    AirProfile, Camera, CameraRig, ExtinctionField, ImageSet, ImageUnits, MediumOptics, PhaseParams, SensorSpec,
    VoxelGrid,
};

fn look(center: Vec3, target: Vec3, w: usize) -> Camera {
    Camera::look_at(center, target, Vec3::new(0.0, 0.0, 1.0), 40.0, w, w).unwrap()
}

fn small_scene() -> (ExtinctionField, CameraRig) {
    let g = VoxelGrid::cube(4, 50.0, Vec3::ZERO).unwrap();
    let f = ExtinctionField::from_fn(g.clone(), |p| {
        let r = (p - Vec3::new(100.0, 100.0, 100.0)).norm();
        if r < 90.0 {
            30.0 * (1.0 - r / 90.0)
        } else {
            0.0
        }
    })
    .unwrap();
    let c = g.center();
    let cams = vec![
        look(c + Vec3::new(0.0, -600.0, 300.0), c, 8),
        look(c + Vec3::new(500.0, 100.0, 400.0), c, 8),
        look(c + Vec3::new(-50.0, 20.0, 700.0), c, 8),
    ];
    (f, CameraRig::new(cams, CameraRig::sun_from_angles(25.0, 30.0), 1.5).unwrap())
}

fn fast_cfg() -> RTConfig {
    RTConfig {
        max_order: 3,
        n_mu: 4,
        n_phi: 8,
        ..RTConfig::default()
    }
}

#[test]
fn transmittance_of_empty_segment_is_one() {
    let g = VoxelGrid::cube(3, 10.0, Vec3::ZERO).unwrap();
    let f = ExtinctionField::zeros(g);
    let t = transmittance(&f, &MediumOptics::default(), &AirProfile::vacuum(), 672.0, Vec3::new(1.0, 2.0, 3.0), Vec3::new(29.0, 17.0, 5.0));
    assert_eq!(t, 1.0);
}

#[test]
fn transmittance_matches_beer_lambert() {
    // 0.1 m⁻¹ = 100 km⁻¹ over 10 m.
    let g = VoxelGrid::cube(5, 4.0, Vec3::ZERO).unwrap();
    let f = ExtinctionField::uniform(g, 100.0).unwrap();
    let a = Vec3::new(1.0, 2.0, 3.0);
    let d = Vec3::new(0.3, 0.5, 0.2).normalized();
    let t = transmittance(&f, &MediumOptics::default(), &AirProfile::vacuum(), 672.0, a, a + d * 10.0);
    assert!((t - (-1.0f64).exp()).abs() < 1e-10, "{t}");
}

#[test]
fn transmittance_composes_along_segments() {
    let (f, _) = small_scene();
    let opt = MediumOptics::default();
    let air = AirProfile::default();
    let a = Vec3::new(3.0, 190.0, 10.0);
    let c = Vec3::new(197.0, 4.0, 160.0);
    let b = a + (c - a) * 0.37;
    let tac = transmittance(&f, &opt, &air, 672.0, a, c);
    let tab = transmittance(&f, &opt, &air, 672.0, a, b);
    let tbc = transmittance(&f, &opt, &air, 672.0, b, c);
    assert!((tac - tab * tbc).abs() < 1e-12);
    assert!(tac < 1.0);
}

/// Independent single-scatter integral for one cubic voxel of side `l` at the
/// origin, with the exact in-voxel sun and camera attenuation.
fn single_scatter_oracle(l: f64, sigma: f64, f0: f64, g: f64, sun: Vec3, cam: Vec3, view: Vec3) -> f64 {
    let exit_dist = |x: Vec3, d: Vec3| -> f64 {
        let mut t = f64::INFINITY;
        for a in 0..3 {
            if d[a] > 0.0 {
                t = t.min((l - x[a]) / d[a]);
            } else if d[a] < 0.0 {
                t = t.min(-x[a] / d[a]);
            }
        }
        t
    };
    let mut t_in = 0.0f64;
    let mut t_out = f64::INFINITY;
    for a in 0..3 {
        let t1 = (0.0 - cam[a]) / view[a];
        let t2 = (l - cam[a]) / view[a];
        t_in = t_in.max(t1.min(t2));
        t_out = t_out.min(t1.max(t2));
    }
    // Scattering angle between the solar beam and the radiance reaching the camera.
    let mu = sun.dot(-view);
    let hg = (1.0 - g * g) / (1.0 + g * g - 2.0 * g * mu).powf(1.5) / (4.0 * PI);
    let n = 200_000;
    let h = (t_out - t_in) / n as f64;
    let mut s = 0.0;
    for k in 0..n {
        let t = t_in + (k as f64 + 0.5) * h;
        let x = cam + view * t;
        let tsun = (-sigma * exit_dist(x, -sun)).exp();
        let tcam = (-sigma * (t - t_in)).exp();
        s += sigma * f0 * hg * tsun * tcam * h;
    }
    s
}

#[test]
fn single_voxel_single_scatter_matches_closed_form() {
    let l = 40.0;
    let beta = 0.25; // km⁻¹, optical size 0.01
    let g = VoxelGrid::cube(1, l, Vec3::ZERO).unwrap();
    let f = ExtinctionField::uniform(g, beta).unwrap();
    let target = Vec3::new(20.0, 20.0, 20.0);
    let cam = look(Vec3::new(-900.0, 300.0, 700.0), target, 1);
    let sun = CameraRig::sun_from_angles(25.0, 60.0);
    let rig = CameraRig::new(vec![cam.clone()], sun, 2.0).unwrap();
    let opt = MediumOptics::default();
    let cfg = RTConfig {
        max_order: 1,
        step: Some(0.05),
        ..RTConfig::default()
    };
    let img = render(&f, &opt, &AirProfile::vacuum(), &rig, &cfg).unwrap();
    let view = cam.pixel_center_ray(0, 0).unwrap();
    let want = single_scatter_oracle(l, beta / 1000.0, 2.0, 0.85, sun, cam.center, view);
    let got = img.data[0][0];
    assert!(((got - want) / want).abs() < 0.01, "got {got}, want {want}");
}

#[test]
fn no_scattering_means_dark_pixels() {
    let (f, rig) = small_scene();
    let opt = MediumOptics::new(PhaseParams { albedo: 0.0, g: 0.85 }, PhaseParams { albedo: 0.0, g: 0.0 }).unwrap();
    let img = render(&f, &opt, &AirProfile::default(), &rig, &fast_cfg()).unwrap();
    assert!(img.data.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn empty_atmosphere_renders_black() {
    let (f, rig) = small_scene();
    let f = ExtinctionField::zeros(f.grid.clone());
    let img = render(&f, &MediumOptics::default(), &AirProfile::vacuum(), &rig, &fast_cfg()).unwrap();
    assert!(img.data.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn radiance_is_linear_in_irradiance() {
    let (f, rig) = small_scene();
    let mut rig2 = rig.clone();
    rig2.irradiance *= 2.0;
    let cfg = RTConfig {
        surface_albedo: 0.3,
        ..fast_cfg()
    };
    let a = render(&f, &MediumOptics::default(), &AirProfile::default(), &rig, &cfg).unwrap();
    let b = render(&f, &MediumOptics::default(), &AirProfile::default(), &rig2, &cfg).unwrap();
    for (x, y) in a.data.iter().flatten().zip(b.data.iter().flatten()) {
        assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-300));
    }
    assert!(a.max() > 0.0);
}

#[test]
fn more_orders_never_darken() {
    let (f, rig) = small_scene();
    let mut prev: Option<ImageSet> = None;
    for k in 1..=4 {
        let cfg = RTConfig {
            max_order: k,
            ..fast_cfg()
        };
        let img = render(&f, &MediumOptics::default(), &AirProfile::default(), &rig, &cfg).unwrap();
        if let Some(p) = &prev {
            for (x, y) in p.data.iter().flatten().zip(img.data.iter().flatten()) {
                assert!(y >= x, "K={k}: {y} < {x}");
            }
        }
        prev = Some(img);
    }
}

/// Upward, downward and sideways flux leaving the box plus the transmitted
/// direct beam, for a zenith sun.
fn outgoing_power(f: &ExtinctionField, cfg: &RTConfig) -> (f64, f64) {
    let rig = CameraRig::new(
        vec![look(Vec3::new(0.0, 0.0, 900.0), Vec3::ZERO, 1)],
        Vec3::new(0.0, 0.0, -1.0),
        1.0,
    )
    .unwrap();
    let field = solve_rt(f, &MediumOptics::default(), &AirProfile::vacuum(), &rig, cfg).unwrap();
    let g = &f.grid;
    let ord = field.ordinates().clone();
    let e = g.extent();
    let mut out = 0.0;
    let faces: [(usize, f64, Vec3); 6] = [
        (0, 0.0, Vec3::new(-1.0, 0.0, 0.0)),
        (0, e.x, Vec3::new(1.0, 0.0, 0.0)),
        (1, 0.0, Vec3::new(0.0, -1.0, 0.0)),
        (1, e.y, Vec3::new(0.0, 1.0, 0.0)),
        (2, 0.0, Vec3::new(0.0, 0.0, -1.0)),
        (2, e.z, Vec3::new(0.0, 0.0, 1.0)),
    ];
    let n = 6;
    for (axis, pos, normal) in faces {
        let (a1, a2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let ext = [e.x, e.y, e.z];
        let cell = ext[a1] / n as f64 * ext[a2] / n as f64;
        for i in 0..n {
            for j in 0..n {
                let mut p = [0.0; 3];
                p[axis] = pos;
                p[a1] = (i as f64 + 0.5) * ext[a1] / n as f64;
                p[a2] = (j as f64 + 0.5) * ext[a2] / n as f64;
                let x = g.origin + Vec3::new(p[0], p[1], p[2]);
                for (d, w) in ord.dirs.iter().zip(&ord.weights) {
                    let c = d.dot(normal);
                    if c > 0.0 {
                        out += w * c * field.radiance_at(x, *d) * cell;
                    }
                }
                if axis == 2 && pos == 0.0 {
                    let top = x + Vec3::new(0.0, 0.0, e.z);
                    out += transmittance(f, &MediumOptics::default(), &AirProfile::vacuum(), 672.0, top, x) * cell;
                }
            }
        }
    }
    (out, e.x * e.y)
}

#[test]
fn outgoing_power_never_exceeds_incoming() {
    let g = VoxelGrid::cube(4, 50.0, Vec3::ZERO).unwrap();
    for peak in [5.0, 40.0] {
        let f = ExtinctionField::from_fn(g.clone(), |p| {
            let r = (p - g.center()).norm();
            (peak * (1.0 - r / 120.0)).max(0.0)
        })
        .unwrap();
        for k in [1, 3, 6] {
            let cfg = RTConfig {
                max_order: k,
                n_mu: 4,
                n_phi: 8,
                ..RTConfig::default()
            };
            let (out, inc) = outgoing_power(&f, &cfg);
            eprintln!("peak {peak} K {k}: out {out} in {inc}");
            assert!(out <= inc, "peak {peak} K {k}: {out} > {inc}");
        }
    }
}

#[test]
fn halving_the_step_changes_pixels_by_under_one_percent() {
    let (f, rig) = small_scene();
    let cfg = fast_cfg();
    let a = render(&f, &MediumOptics::default(), &AirProfile::default(), &rig, &cfg).unwrap();
    let fine = RTConfig {
        step: Some(cfg.step_for(&f.grid) / 2.0),
        ..cfg
    };
    let b = render(&f, &MediumOptics::default(), &AirProfile::default(), &rig, &fine).unwrap();
    let m = b.max();
    for (x, y) in a.data.iter().flatten().zip(b.data.iter().flatten()) {
        assert!((x - y).abs() < 0.01 * m, "{x} vs {y}");
    }
}

#[test]
fn isotropic_voxel_looks_the_same_at_equal_scattering_angles() {
    let l = 20.0;
    let g = VoxelGrid::cube(1, l, Vec3::ZERO).unwrap();
    let f = ExtinctionField::uniform(g, 2.0).unwrap();
    let c = Vec3::new(10.0, 10.0, 10.0);
    let opt = MediumOptics::new(PhaseParams { albedo: 1.0, g: 0.0 }, PhaseParams { albedo: 1.0, g: 0.0 }).unwrap();
    // Sun at zenith; two cameras at the same elevation, mirrored azimuths.
    let cams = vec![
        look(c + Vec3::new(800.0, 0.0, 800.0), c, 1),
        look(c + Vec3::new(0.0, -800.0, 800.0), c, 1),
        look(c + Vec3::new(-800.0, 0.0, 800.0), c, 1),
    ];
    let rig = CameraRig::new(cams, Vec3::new(0.0, 0.0, -1.0), 1.0).unwrap();
    let img = render(&f, &opt, &AirProfile::vacuum(), &rig, &RTConfig { max_order: 4, n_mu: 4, n_phi: 8, ..RTConfig::default() }).unwrap();
    let v: Vec<f64> = img.data.iter().map(|d| d[0]).collect();
    for x in &v[1..] {
        assert!(((x - v[0]) / v[0]).abs() < 0.01, "{v:?}");
    }
}

#[test]
fn solved_field_is_non_negative_and_finite() {
    let (f, rig) = small_scene();
    let field = solve_rt(&f, &MediumOptics::default(), &AirProfile::default(), &rig, &RTConfig { surface_albedo: 0.2, ..fast_cfg() }).unwrap();
    assert!(field.radiance_data().iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(field.source_data().iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(field.radiance_data().iter().any(|v| *v > 0.0));
}

#[test]
fn noise_maps_peak_to_headroom_and_is_reproducible() {
    let spec = SensorSpec::default();
    let img = ImageSet::new(ImageUnits::Radiance, vec![3], vec![1], vec![vec![0.0, 0.5, 2.0]], None).unwrap();
    let a = apply_noise(&img, &spec, 7).unwrap();
    let b = apply_noise(&img, &spec, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.electrons_per_radiance, Some(12150.0 / 2.0));
    assert!(a.data.iter().flatten().all(|g| (0.0..=1023.0).contains(g) && g.fract() == 0.0));
}

#[test]
fn mean_graylevel_follows_gain() {
    // 1300 expected electrons -> 100 graylevels on average.
    let spec = SensorSpec::default();
    let img = ImageSet::new(ImageUnits::Radiance, vec![4000], vec![1], vec![vec![1.0; 4000]], None).unwrap();
    let gl = apply_noise_with_scale(&img, &spec, 1300.0, 3).unwrap();
    let mean: f64 = gl.data[0].iter().sum::<f64>() / 4000.0;
    // Std of the mean: sqrt(1300 + 169) / 13 / sqrt(4000) ≈ 0.047.
    assert!((mean - 100.0).abs() < 0.25, "{mean}");
}

#[test]
fn zero_signal_gets_readout_noise_only() {
    let spec = SensorSpec::default();
    let img = ImageSet::new(ImageUnits::Radiance, vec![2000], vec![1], vec![vec![0.0; 2000]], None).unwrap();
    let gl = apply_noise(&img, &spec, 1).unwrap();
    let mean: f64 = gl.data[0].iter().sum::<f64>() / 2000.0;
    assert!(mean < 1.0 && gl.data[0].iter().any(|g| *g > 0.0));
}

#[test]
fn bright_scene_clips_to_the_adc_range() {
    let spec = SensorSpec::default();
    let img = ImageSet::new(ImageUnits::Radiance, vec![2], vec![1], vec![vec![1.0, 1.0]], None).unwrap();
    let gl = apply_noise_with_scale(&img, &spec, 1e6, 1).unwrap();
    assert_eq!(gl.data[0], vec![1023.0, 1023.0]);
}

#[test]
fn likelihood_peaks_at_the_mean() {
    let spec = SensorSpec::default();
    let at = pixel_likelihood(100.0, 1300.0, &spec);
    for g in [90.0, 99.0, 101.0, 120.0] {
        assert!(pixel_likelihood(g, 1300.0, &spec) < at);
    }
}

#[test]
fn likelihood_ratio_matches_hand_arithmetic() {
    let spec = SensorSpec::default();
    // var1 = 1300 + 169, var2 = 1430 + 169; residuals 0 and -130 electrons.
    let want = -0.5 * (1599.0f64 / 1469.0).ln() - 130.0 * 130.0 / (2.0 * 1599.0);
    let got = pixel_likelihood(100.0, 1300.0, &spec) - pixel_likelihood(100.0, 1430.0, &spec);
    assert!((-got - want).abs() < 1e-12, "{got} {want}");
}

#[test]
fn image_likelihood_sums_pixels() {
    let spec = SensorSpec::default();
    let obs = ImageSet::new(ImageUnits::Graylevel, vec![2], vec![1], vec![vec![100.0, 50.0]], Some(1.0)).unwrap();
    let mu = ImageSet::new(ImageUnits::Radiance, vec![2], vec![1], vec![vec![1290.0, 700.0]], None).unwrap();
    let s = log_likelihood(&obs, &mu, &spec).unwrap();
    let want = pixel_likelihood(100.0, 1290.0, &spec) + pixel_likelihood(50.0, 700.0, &spec);
    assert!((s - want).abs() < 1e-12);
}
