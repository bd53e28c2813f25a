//! Trainer determinism, loss bookkeeping and estimator bias.

use qrf_core::bench::{build_scene, orbit_pose, SceneId, TrajectorySpec};
use qrf_core::camera::CameraIntrinsics;
use qrf_core::frame_store::{BinaryFrameStore, StoreMeta, StoreWriter};
use qrf_core::image::FluxImage;
use qrf_core::photon_sim::{
    render_flux, sample_binary_frame, sample_conventional_frame, ConventionalConfig, RenderOptions, SpcConfig,
};
use qrf_core::rng::derive_seed;
use qrf_core::trainer::{conventional_loss, quanta_loss, train, TrainConfig};

fn small_store(dir: &std::path::Path) -> (BinaryFrameStore, qrf_core::pose::PoseTrajectory, CameraIntrinsics) {
    let gt = build_scene(SceneId::Blobs, 8).unwrap();
    let intr = CameraIntrinsics::with_fov(8, 8, 40.0).unwrap();
    let traj = TrajectorySpec::Circular { radius: 3.0, elevation_deg: 20.0, sweep_deg: 90.0 };
    let rate = 1e4;
    let poses = traj.sample(48, rate, 0.0).unwrap();
    let spc = SpcConfig::at_rate(rate).unwrap();
    let opts = RenderOptions { flux_scale: 8000.0, n_samples: 32, ..Default::default() };
    let path = dir.join("s.qrfbin");
    let mut w = StoreWriter::create(&path, 8, 8, StoreMeta { frame_rate: rate, tau: spc.tau }).unwrap();
    for k in 0..poses.len() {
        let flux = render_flux(&gt, &poses.pose(k), &intr, &opts).unwrap();
        w.push(&sample_binary_frame(&flux, &spc, derive_seed(5, k as u64)).unwrap()).unwrap();
    }
    w.finish().unwrap();
    (BinaryFrameStore::open(&path).unwrap(), poses, intr)
}

fn cfg() -> TrainConfig {
    TrainConfig {
        iterations: 30,
        batch_size: 128,
        resolution: [6, 6, 6],
        n_samples: 24,
        lambda: 0.1,
        pose_lr: 1e-3,
        pose_opt_start_iteration: Some(5),
        log_every: 1,
        seed: 9,
        ..TrainConfig::default()
    }
}

#[test]
fn seeded_runs_repeat_and_total_decomposes() {
    let dir = tempfile::tempdir().unwrap();
    let (store, poses, intr) = small_store(dir.path());
    let cfg = cfg();
    let a = train(&store, &poses, &intr, &cfg).unwrap();
    let b = train(&store, &poses, &intr, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.field.params(), b.field.params());
    assert_eq!(a.poses, b.poses);
    assert_eq!(a.history.len(), cfg.iterations);
    for r in &a.history {
        assert!((r.total - (r.photometric + cfg.lambda * r.regularizer)).abs() <= 1e-9 * r.total.abs().max(1.0));
    }
    // Poses move once the warm-up is over.
    assert_ne!(a.poses, poses);
    let c = train(&store, &poses, &intr, &TrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn zero_lambda_reports_photometric_only() {
    let dir = tempfile::tempdir().unwrap();
    let (store, poses, intr) = small_store(dir.path());
    let out = train(&store, &poses, &intr, &TrainConfig { lambda: 0.0, iterations: 5, ..cfg() }).unwrap();
    for r in &out.history {
        assert_eq!(r.total, r.photometric);
    }
}

#[test]
fn quanta_loss_minimiser_is_bernoulli_mean() {
    let spc = SpcConfig::new(1e-4, 1e4).unwrap();
    let flux = FluxImage::constant(1, 1, 7000.0).unwrap();
    let obs: Vec<u8> = (0..100_000u64).map(|k| sample_binary_frame(&flux, &spc, k).unwrap().bits()[0]).collect();
    let expected = spc.detection_probability(7000.0);
    let mut p = 0.5f64;
    for _ in 0..200 {
        let (_, g) = quanta_loss(&vec![p; obs.len()], &obs).unwrap();
        p -= 0.4 * g.iter().sum::<f64>();
    }
    assert!((p - expected).abs() < 1e-2, "{p} vs {expected}");
}

/// Fits one constant by gradient descent on the given loss.
fn fit_constant(obs: &[f64], loss: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let mut x = 0.5;
    for _ in 0..200 {
        let g: f64 = loss(&vec![x; obs.len()]).iter().sum();
        x -= 0.4 * g;
    }
    x
}

#[test]
fn read_noise_biases_conventional_but_not_quanta() {
    // One photon per conventional exposure against 4 e- of read noise.
    let frame_rate_conv = 50.0;
    let phi = 50.0;
    let pixels = 20_000;
    let mut conv = ConventionalConfig::new(1.0 / frame_rate_conv, 1000.0, 4.0).unwrap();
    // Linear response, so any bias comes from the noise floor and its clip.
    conv.response_gamma = 1.0;
    let zero = FluxImage::constant(pixels, 1, 0.0).unwrap();
    let lit = FluxImage::constant(pixels, 1, phi as f32).unwrap();
    let conv_fit = |flux: &FluxImage, seed| {
        let obs: Vec<f64> = sample_conventional_frame(flux, &conv, seed).unwrap().data().iter().map(|&v| v as f64).collect();
        let x = fit_constant(&obs, |p| conventional_loss(p, &obs).unwrap().1);
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        let sd = (obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / obs.len() as f64).sqrt();
        (x, sd / (obs.len() as f64).sqrt())
    };
    let (c_lit, c_se) = conv_fit(&lit, 1);
    let (c_dark, _) = conv_fit(&zero, 2);
    let c_true = conv.response(phi / frame_rate_conv / conv.full_well);
    let c_phi = conv.intensity_to_flux(c_lit);
    let noise_floor = conv.intensity_to_flux(c_dark);
    assert!((c_lit - c_true).abs() > 3.0 * c_se, "conventional fit is not biased: {c_lit} vs {c_true}");
    assert!(noise_floor > 0.0);
    assert!((c_phi - phi).abs() > 0.1 * phi, "conventional flux {c_phi} vs {phi}");

    // Same photon budget: 200 binary frames per conventional exposure.
    let spc = SpcConfig::at_rate(1e4).unwrap();
    let frames = (spc.frame_rate / frame_rate_conv) as u64;
    let flux = FluxImage::constant(pixels, 1, phi as f32).unwrap();
    let mut obs = Vec::with_capacity(pixels * frames as usize);
    for k in 0..frames {
        obs.extend(sample_binary_frame(&flux, &spc, derive_seed(3, k)).unwrap().bits().iter().copied());
    }
    let obs_f: Vec<f64> = obs.iter().map(|&b| b as f64).collect();
    let p = fit_constant(&obs_f, |p| quanta_loss(p, &obs).unwrap().1);
    let p_true = spc.detection_probability(phi);
    let se = (p_true * (1.0 - p_true) / obs.len() as f64).sqrt();
    assert!((p - p_true).abs() < 3.0 * se, "quanta fit {p} vs {p_true} (se {se})");
}

#[test]
fn orbit_pose_is_valid_rotation() {
    let p = orbit_pose(2.0, 1.0, -0.3).unwrap();
    let r = p.rotation;
    assert!((r.determinant() - 1.0).abs() < 1e-12);
    assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-12);
}
