use sct_core::math::Vec3;
use sct_core::products::*;
use sct_core::rt::RTConfig;
use sct_core::scene::*;

fn field(v: &[f64]) -> ExtinctionField {
    let g = VoxelGrid::new([v.len(), 1, 1], [1.0; 3], Vec3::ZERO).unwrap();
    ExtinctionField::new(g, v.to_vec()).unwrap()
}

#[test]
fn epsilon_delta_examples() {
    let t = field(&[10.0, 20.0, 0.0]);
    assert_eq!(epsilon_delta(&t, &t).unwrap(), (0.0, 0.0));
    let (e, d) = epsilon_delta(&t, &field(&[12.0, 16.0, 1.0])).unwrap();
    assert_eq!(e, 7.0 / 30.0);
    assert_eq!(d, 1.0 / 30.0);
    assert_eq!(epsilon_delta(&t, &field(&[0.0; 3])).unwrap(), (1.0, 1.0));
    assert!(epsilon_delta(&field(&[0.0; 3]), &t).is_err());
    assert!(epsilon_delta(&t, &field(&[1.0; 4])).is_err());
    // Scale covariance.
    let (e2, _) = epsilon_delta(&field(&[30.0, 60.0, 0.0]), &field(&[36.0, 48.0, 3.0])).unwrap();
    assert!((e2 - e).abs() < 1e-15);
}

#[test]
fn snell_examples() {
    assert_eq!(snell_refract(0.0, 1.5), 0.0);
    assert!((snell_refract(30f64.to_radians(), 1.5).to_degrees() - 19.471).abs() < 1e-3);
    assert!((snell_refract(90f64.to_radians(), 1.5).to_degrees() - 41.810).abs() < 1e-3);
}

#[test]
fn fresnel_examples() {
    assert!((cover_transmissivity_at(0.0, 1.5) - 0.96).abs() < 1e-12);
    assert!((cover_transmissivity_at(60f64.to_radians(), 1.5) - 0.911).abs() < 1e-3);
    assert!(cover_transmissivity_at(89.999f64.to_radians(), 1.5) < 1e-3);
    assert_eq!(cover_transmissivity_at(90f64.to_radians(), 1.5), 0.0);
    let down = Vec3::new(0.0, 0.0, -1.0);
    assert!((cover_transmissivity(down, 1.5) - 0.96).abs() < 1e-12);
}

#[test]
fn fresnel_continuous_and_monotone() {
    for eps in [1e-9, 1e-7, 1e-5] {
        assert!((cover_transmissivity_at(eps, 1.5) - 0.96).abs() < 1e-6);
    }
    let mut prev = cover_transmissivity_at(0.0, 1.5);
    for i in 1..900 {
        let t = cover_transmissivity_at((i as f64 * 0.1).to_radians(), 1.5);
        assert!(t <= prev + 1e-12, "at {}°", i as f64 * 0.1);
        prev = t;
    }
}

#[test]
fn ghi_isotropic_and_bounds() {
    let q = HemisphereQuadrature::default();
    let i0 = 2.5;
    assert!((ghi(&|_| i0, None, None, &q) - std::f64::consts::PI * i0).abs() < 1e-6);
    assert_eq!(ghi(&|_| 0.0, None, None, &q), 0.0);
    let sky = |w: Vec3| 1.0 + 0.3 * w.z.abs() + 0.2 * w.x;
    let beam = DirectBeam {
        direction: CameraRig::sun_from_angles(35.0, 10.0),
        normal_irradiance: 3.0,
    };
    let u = ghi(&sky, Some(beam), None, &q);
    let c = ghi(&sky, Some(beam), Some(1.5), &q);
    assert!(c <= u);
    assert!((ghi(&|_| 0.0, Some(beam), None, &q) - 3.0 * 35f64.to_radians().cos()).abs() < 1e-12);
}

#[test]
fn ghi_quadrature_converges() {
    let sky = |w: Vec3| 1.0 + 0.3 * w.z.abs() + 0.2 * w.x + 0.1 * w.y * w.y;
    let a = HemisphereQuadrature { n_mu: 32, n_phi: 64 };
    let b = HemisphereQuadrature { n_mu: 64, n_phi: 128 };
    for n in [None, Some(1.5)] {
        let (x, y) = (ghi(&sky, None, n, &a), ghi(&sky, None, n, &b));
        assert!((x - y).abs() < 1e-6, "{n:?}: {x} vs {y}");
    }
}

fn empty_scene() -> (ExtinctionField, VoxelGrid) {
    let g = VoxelGrid::cube(3, 50.0, Vec3::new(0.0, 0.0, 0.0)).unwrap();
    (ExtinctionField::zeros(g.clone()), g)
}

fn rig(zenith: f64) -> CameraRig {
    let c = Camera::look_at(Vec3::new(75.0, 75.0, 500.0), Vec3::new(75.0, 75.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 30.0, 4, 4).unwrap();
    CameraRig::new(vec![c], CameraRig::sun_from_angles(zenith, 0.0), 1.0).unwrap()
}

fn rt() -> RTConfig {
    RTConfig {
        max_order: 2,
        n_mu: 4,
        n_phi: 8,
        ..RTConfig::default()
    }
}

#[test]
fn pv_current_linearity_and_cosine_law() {
    let (f, _) = empty_scene();
    let pts = [Vec3::new(75.0, 75.0, 0.0)];
    let q = HemisphereQuadrature { n_mu: 8, n_phi: 16 };
    let one = PVSpec {
        wavelengths_nm: vec![660.0],
        response: vec![0.7],
        solar_irradiance: vec![1.3],
        ..PVSpec::default()
    };
    let r0 = rig(0.0);
    let i = pv_current(&f, &pts, &r0, &MediumOptics::default(), &AirProfile::vacuum(), &one, &rt(), &q).unwrap();
    // Clear sky, sun at zenith: GHI is the normal beam through the cover.
    assert!((i[0] - 0.7 * 1.3 * 0.96 * 20.0).abs() < 1e-12);
    let mut prev = i[0];
    for z in [20.0, 40.0, 60.0, 80.0] {
        let v = pv_current(&f, &pts, &rig(z), &MediumOptics::default(), &AirProfile::vacuum(), &one, &rt(), &q).unwrap()[0];
        assert!(v < prev);
        prev = v;
    }
    // Five-band sum equals per-band calls.
    let pv = PVSpec::default();
    let mut cloudy = f.clone();
    cloudy.beta[13] = 40.0;
    let air = AirProfile::default();
    let all = pv_current(&cloudy, &pts, &rig(30.0), &MediumOptics::default(), &air, &pv, &rt(), &q).unwrap()[0];
    let parts: f64 = (0..5)
        .map(|b| pv_current(&cloudy, &pts, &rig(30.0), &MediumOptics::default(), &air, &pv.band(b), &rt(), &q).unwrap()[0])
        .sum();
    assert!((all - parts).abs() < 1e-12 * all);
}

#[test]
fn relative_response_examples() {
    assert!((relative_response(0.95, 1.05, 1.0) + 0.1).abs() < 1e-12);
    assert_eq!(relative_response(1.05, 0.95, 1.0), -relative_response(0.95, 1.05, 1.0));
    let (mut f, _) = empty_scene();
    f.beta[13] = 30.0;
    let pts = [Vec3::new(75.0, 75.0, 0.0), Vec3::new(10.0, 10.0, 0.0)];
    let q = HemisphereQuadrature { n_mu: 4, n_phi: 8 };
    let pv = PVSpec::default().band(2);
    let air = AirProfile::vacuum();
    let zero = vec![0.0; f.len()];
    let r = pv_relative_response(&f, &zero, &pts, &rig(0.0), &MediumOptics::default(), &air, &pv, &rt(), &q).unwrap();
    assert_eq!(r, vec![0.0, 0.0]);
    let mut std = zero.clone();
    std[13] = 10.0;
    let r = pv_relative_response(&f, &std, &pts, &rig(0.0), &MediumOptics::default(), &air, &pv, &rt(), &q).unwrap();
    // More cloud over the panel means less current.
    assert!(r[0] < 0.0, "{r:?}");
}

#[test]
fn microphysics_examples() {
    let c = MicrophysConstants::default();
    assert_eq!(effective_radius(100.0, 0.5, &c).unwrap(), 7.5);
    assert_eq!(effective_radius(100.0, 1.0, &c).unwrap(), 15.0);
    assert!(effective_radius(0.0, 0.5, &c).is_err());
    assert!((lwc_from_re(100.0, 7.5, &c) - 0.5).abs() < 1e-12);
    assert_eq!(lwc_from_re(0.0, 7.5, &c), 0.0);
    for (b, l) in [(3.0, 0.01), (57.0, 0.8), (250.0, 2.3)] {
        let r = effective_radius(b, l, &c).unwrap();
        assert!((lwc_from_re(b, r, &c) - l).abs() < 1e-10);
    }
}

#[test]
fn adiabatic_fraction_examples() {
    let g = VoxelGrid::new([2, 1, 1], [10.0; 3], Vec3::new(0.0, 0.0, 295.0)).unwrap();
    // Layer center at 300 m.
    let p = AdiabaticProfile::Linear { c: 2e-3 };
    let af = adiabatic_fraction(&[0.3, 0.6], &g, &p, 0.0).unwrap();
    assert!((af.values[0].unwrap() - 0.5).abs() < 1e-12);
    assert!((af.values[1].unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(af.super_adiabatic, 0);
    let af = adiabatic_fraction(&[0.9, 0.6], &g, &p, 0.0).unwrap();
    assert!(af.values[0].unwrap() > 1.0);
    assert_eq!(af.super_adiabatic, 1);
    let af = adiabatic_fraction(&[0.9, 0.6], &g, &p, 400.0).unwrap();
    assert_eq!(af.values, vec![None, None]);
    let t = AdiabaticProfile::Table {
        z_m: vec![100.0, 200.0],
        lwc: vec![0.2, 0.6],
    };
    assert!((t.lwc_at(150.0) - 0.4).abs() < 1e-12);
    assert!((t.lwc_at(50.0) - 0.1).abs() < 1e-12);
    assert_eq!(t.lwc_at(900.0), 0.6);
}

#[test]
fn core_of_a_cylinder() {
    let g = VoxelGrid::new([80, 80, 3], [10.0, 10.0, 50.0], Vec3::new(0.0, 0.0, 1000.0)).unwrap();
    let axis = (400.0, 400.0);
    let f = ExtinctionField::from_fn(g.clone(), |p| {
        if ((p.x - axis.0).powi(2) + (p.y - axis.1).powi(2)).sqrt() <= 300.0 {
            50.0
        } else {
            0.0
        }
    })
    .unwrap();
    let core = core_mask(&f, 100.0);
    for (u, is_core) in core.iter().enumerate() {
        let p = g.center_of(u);
        let r = ((p.x - axis.0).powi(2) + (p.y - axis.1).powi(2)).sqrt();
        // One voxel of slack for the discretized edge.
        if r <= 200.0 - 10.0 {
            assert!(is_core, "r={r}");
        }
        if r > 200.0 + 10.0 {
            assert!(!is_core, "r={r}");
        }
    }
    let prof = core_re_profile(&f, &AdiabaticProfile::default(), &MicrophysConstants::default(), 1000.0).unwrap();
    assert_eq!(prof.len(), 3);
    // Uniform β with linear LWC gives r^e linear in Z.
    let s1 = (prof[1].re_um - prof[0].re_um) / (prof[1].z - prof[0].z);
    let s2 = (prof[2].re_um - prof[1].re_um) / (prof[2].z - prof[1].z);
    assert!((s1 - s2).abs() < 1e-12);
    assert!(prof.iter().all(|s| s.core_voxels == prof[0].core_voxels));
    // 25 m layer: LWC 0.05, r^e = 3·2·0.05·1e9/(4e6·50) = 1.5 µm.
    assert!((prof[0].re_um - 1.5).abs() < 1e-12);
    assert!(!prof[0].precipitating);
    let mut thin = f.clone();
    let nxy = 6400;
    thin.beta[nxy..2 * nxy].iter_mut().for_each(|b| *b = 0.0);
    let prof = core_re_profile(&thin, &AdiabaticProfile::default(), &MicrophysConstants::default(), 1000.0).unwrap();
    assert_eq!(prof.len(), 2);
}

#[test]
fn af_histogram_bins() {
    let g = VoxelGrid::new([5, 5, 1], [10.0; 3], Vec3::ZERO).unwrap();
    let f = ExtinctionField::uniform(g.clone(), 1.0).unwrap();
    let lwc = vec![0.01; 25];
    let af = adiabatic_fraction(&lwc, &g, &AdiabaticProfile::Linear { c: 2e-3 }, 0.0).unwrap();
    let h = af_histogram(&af, &f, 10.0, 4).unwrap();
    assert_eq!(h[0].count, 1);
    assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 25);
    assert!((h[0].mean_af - 1.0).abs() < 1e-12);
}
