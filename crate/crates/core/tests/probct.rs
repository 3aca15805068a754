use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sct_core::math::Vec3;
use sct_core::probct::*;
use sct_core::scene::{Camera, CameraRig, ImageSet, ImageUnits, SensorSpec, VoxelGrid};

fn small_cfg() -> ProbCtConfig {
    ProbCtConfig {
        decoder_width: 32,
        decoder_layers: 3,
        ..ProbCtConfig::default()
    }
}

fn scene(n_cam: usize, w: usize, h: usize, seed: u64) -> (VoxelGrid, CameraRig, ImageSet) {
    let grid = VoxelGrid::cube(4, 25.0, Vec3::ZERO).unwrap();
    let c = grid.center();
    let cams = (0..n_cam)
        .map(|k| {
            let a = k as f64 * 1.3;
            let pos = c + Vec3::new(300.0 * a.cos(), 300.0 * a.sin(), 200.0);
            Camera::look_at(pos, c, Vec3::new(0.0, 0.0, 1.0), 30.0, w, h).unwrap()
        })
        .collect();
    let rig = CameraRig::new(cams, Vec3::new(0.0, 0.0, -1.0), 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n_cam).map(|_| (0..w * h).map(|_| rng.random_range(0.0..1023.0f64).round()).collect()).collect();
    let imgs = ImageSet::new(ImageUnits::Graylevel, vec![w; n_cam], vec![h; n_cam], data, Some(1.0)).unwrap();
    (grid, rig, imgs)
}

#[test]
fn map_examples() {
    let mut d = vec![0.0; 10];
    d[5] = 1.0;
    assert_eq!(map_estimate(&d, 1.0), 5.0);
    assert_eq!(map_estimate(&[0.1, 0.3, 0.6], 1.0), 2.0);
    assert_eq!(map_estimate(&[0.5, 0.5], 1.0), 0.0);
}

#[test]
fn mean_examples() {
    let mut d = vec![0.0; 10];
    d[5] = 1.0;
    assert_eq!(mean_estimate(&d, 1.0), 5.0);
    assert_eq!(mean_estimate(&[0.5, 0.5], 1.0), 0.5);
    assert_eq!(mean_estimate(&[0.25, 0.75], 2.0), 1.5);
}

#[test]
fn entropy_examples() {
    let mut d = vec![0.0; 301];
    d[7] = 1.0;
    assert_eq!(normalized_entropy(&d), 0.0);
    assert!((normalized_entropy(&vec![1.0 / 301.0; 301]) - 1.0).abs() < 1e-12);
    d[7] = 0.5;
    d[9] = 0.5;
    assert!((normalized_entropy(&d) - 0.12145).abs() < 1e-5);
}

#[test]
fn std_examples() {
    let mut d = vec![0.0; 4];
    d[2] = 1.0;
    assert_eq!(posterior_std(&d, 1.0), 0.0);
    assert!((posterior_std(&[0.5, 0.0, 0.5], 1.0) - 1.0).abs() < 1e-12);
    assert!((posterior_std(&[0.25, 0.5, 0.25], 1.0) - 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn smoothmax_examples() {
    let mut d = vec![0.0; 12];
    d[9] = 1.0;
    assert_eq!(smoothmax_estimate(&d, 0.5, 10.0), 4.5);
    let v = smoothmax_estimate(&[0.1, 0.3, 0.6], 1.0, 10.0);
    assert!((v - 1.99902).abs() < 1e-4, "{v}");
}

#[test]
fn smoothmax_converges_to_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut n = 0;
    while n < 1000 {
        let q = rng.random_range(2..40);
        let mut p: Vec<f64> = (0..q).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        let mut sorted = p.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if sorted[0] < 1.15 * sorted[1] {
            continue;
        }
        n += 1;
        assert!((smoothmax_estimate(&p, 1.0, 100.0) - map_estimate(&p, 1.0)).abs() < 1e-3);
    }
}

#[test]
fn map_is_invariant_to_monotone_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let p: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut r: Vec<f64> = p.iter().map(|x| x.powf(3.0) + 0.1 * x).collect();
        let s: f64 = r.iter().sum();
        r.iter_mut().for_each(|x| *x /= s);
        assert_eq!(map_estimate(&p, 1.0), map_estimate(&r, 1.0));
    }
}

#[test]
fn entropy_stays_in_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut p: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..1.0f64).powi(4)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        let h = normalized_entropy(&p);
        assert!(h > 0.0 && h < 1.0);
    }
}

#[test]
fn spec_bins() {
    let s = PosteriorSpec::default();
    assert_eq!((s.q, s.dbeta), (301, 1.0));
    assert_eq!(s.bin_of(1.7), 1);
    assert_eq!(s.bin_of(300.9), 300);
    assert!(s.check_covers(300.0).is_ok());
    assert!(s.check_covers(302.0).is_err());
    assert!(PosteriorSpec { q: 1, dbeta: 1.0 }.validate().is_err());
}

#[test]
fn decoder_outputs_a_distribution() {
    let m = ProbCt::new(ProbCtConfig::default(), 3, 1).unwrap();
    let u: Vec<f32> = (0..m.input_width()).map(|i| (i as f32 * 0.37).sin()).collect();
    let p = m.decode(&u).unwrap();
    assert_eq!(p.len(), 301);
    assert!(p.iter().all(|x| *x > 0.0 && *x < 1.0));
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    assert_eq!(p, m.decode(&u).unwrap());
    assert!(m.decode(&u[1..]).is_err());
}

#[test]
fn coordinate_encoder_is_deterministic_and_sensitive() {
    let m = ProbCt::new(small_cfg(), 2, 4).unwrap();
    let a = m.encode_coords([0.1, -0.3, 0.5]);
    assert_eq!(a.len(), 64);
    assert_eq!(a, m.encode_coords([0.1, -0.3, 0.5]));
    for k in 0..3 {
        let mut x = [0.1, -0.3, 0.5];
        x[k] += 0.05;
        assert_ne!(a, m.encode_coords(x));
    }
    let (grid, rig, _) = scene(3, 8, 8, 0);
    let m3 = ProbCt::new(small_cfg(), 3, 4).unwrap();
    let cams = m3.encode_cameras(&rig, &grid);
    assert_eq!(cams.len(), 3);
    let sub = m3.encode_cameras(&rig.subset(&[2]).unwrap(), &grid);
    assert_eq!(sub[0], cams[2]);
}

#[test]
fn feature_maps_have_half_resolution_and_shared_weights() {
    let (_, rig, imgs) = scene(3, 13, 8, 1);
    let m = ProbCt::new(small_cfg(), 3, 5).unwrap();
    let s = SensorSpec::default();
    let maps = m.extract_features(&imgs, &s).unwrap();
    assert_eq!(maps.len(), 3);
    for f in &maps {
        assert_eq!((f.rows, f.cols), (7 * 4, 64));
    }
    let perm = [2, 0, 1];
    let pm = m.extract_features(&imgs.subset(&perm).unwrap(), &s).unwrap();
    for (i, &p) in perm.iter().enumerate() {
        assert_eq!(pm[i], maps[p]);
    }
    let same = imgs.subset(&[0, 0, 0]).unwrap();
    let sm = m.extract_features(&same, &s).unwrap();
    assert_eq!(sm[1], sm[2]);
    // Sampling follows the camera order.
    let x = Vec3::new(50.0, 50.0, 50.0);
    let v = sample_features(&maps, &rig, x).unwrap();
    let vp = sample_features(&pm, &rig.subset(&perm).unwrap(), x).unwrap();
    for (i, &p) in perm.iter().enumerate() {
        assert_eq!(vp[i * 64..(i + 1) * 64], v[p * 64..(p + 1) * 64]);
    }
}

#[test]
fn bilinear_taps_hit_grid_points_and_midpoints() {
    // Image coordinate 2i+1 is the center of map cell i.
    let t = bilinear_taps([5.0, 3.0], 4, 4);
    let w: f64 = t.iter().filter(|(i, _)| *i == 4 + 2).map(|(_, w)| w).sum();
    assert!((w - 1.0).abs() < 1e-12);
    let t = bilinear_taps([4.0, 4.0], 4, 4);
    for (i, w) in t {
        assert!([5, 6, 9, 10].contains(&i));
        assert!((w - 0.25).abs() < 1e-12);
    }
}

#[test]
fn out_of_frame_cameras_contribute_zeros() {
    let (_, rig, imgs) = scene(2, 8, 8, 2);
    let m = ProbCt::new(small_cfg(), 2, 5).unwrap();
    let maps = m.extract_features(&imgs, &SensorSpec::default()).unwrap();
    let far = Vec3::new(1e5, -3e4, 50.0);
    let v = sample_features(&maps, &rig, far).unwrap();
    assert!(v.iter().all(|x| *x == 0.0));
}

#[test]
fn inference_respects_the_mask() {
    let (grid, rig, imgs) = scene(2, 8, 8, 3);
    let m = ProbCt::new(small_cfg(), 2, 6).unwrap();
    let s = SensorSpec::default();
    let none = infer_scene(&m, &imgs, &rig, &grid, &vec![false; grid.len()], &s).unwrap();
    assert!(none.is_empty());
    assert!(none.map_field().beta.iter().all(|b| *b == 0.0));
    let mask: Vec<bool> = (0..grid.len()).map(|u| u % 3 == 0).collect();
    let pg = infer_scene(&m, &imgs, &rig, &grid, &mask, &s).unwrap();
    assert_eq!(pg.len(), mask.iter().filter(|b| **b).count());
    for i in 0..pg.len() {
        let r = pg.row(i);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-6 && r.iter().all(|p| *p >= 0.0));
    }
    assert_eq!(pg.distribution(1)[0], 1.0);
    let again = infer_scene(&m, &imgs, &rig, &grid, &mask, &s).unwrap();
    assert_eq!(pg, again);
    assert!(infer_scene(&m, &imgs, &rig.subset(&[0]).unwrap(), &grid, &mask, &s).is_err());
}

#[test]
fn checkpoint_layout_is_checked() {
    let m = ProbCt::new(small_cfg(), 2, 7).unwrap();
    let r = ProbCt::from_params(small_cfg(), 2, m.params.clone()).unwrap();
    assert_eq!(r, m);
    assert!(ProbCt::from_params(small_cfg(), 3, m.params.clone()).is_err());
}
