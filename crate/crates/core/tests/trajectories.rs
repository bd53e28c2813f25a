//! Trajectory noise, smoothing and interpolation against analytic oracles.

use qrf_core::bench::orbit_pose;
use qrf_core::camera::Pose;
use qrf_core::pose::rotation::rotation_angle_between;
use qrf_core::pose::{fourier_smooth, interpolate_poses, perturb_trajectory, smoothing_penalty, LowpassSpec, NoiseSpec, PoseTrajectory};

fn constant(n: usize, rate: f64) -> PoseTrajectory {
    let row = orbit_pose(3.0, 0.4, 0.2).unwrap().to_row();
    PoseTrajectory::new(vec![row; n], rate).unwrap()
}

fn diff(a: &PoseTrajectory, b: &PoseTrajectory) -> Vec<[f64; 9]> {
    a.rows()
        .iter()
        .zip(b.rows())
        .map(|(x, y)| std::array::from_fn(|j| x[j] - y[j]))
        .collect()
}

fn rms(rows: &[[f64; 9]], cols: std::ops::Range<usize>) -> f64 {
    let k = cols.len() as f64;
    (rows.iter().map(|r| r[cols.clone()].iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / (rows.len() as f64 * k)).sqrt()
}

#[test]
fn zero_magnitude_noise_is_identity() {
    let t = constant(100, 1000.0);
    let noise = NoiseSpec::white(1000.0, 0.0, 0.0);
    assert_eq!(perturb_trajectory(&t, &noise, 3).unwrap(), t);
}

#[test]
fn noise_rms_matches_sigma_and_seed_is_deterministic() {
    let t = constant(2048, 1000.0);
    let noise = NoiseSpec::white(1000.0, 0.02, 0.01);
    let a = perturb_trajectory(&t, &noise, 8).unwrap();
    assert_eq!(a, perturb_trajectory(&t, &noise, 8).unwrap());
    assert_ne!(a, perturb_trajectory(&t, &noise, 9).unwrap());
    let d = diff(&a, &t);
    assert!((rms(&d, 0..3) - 0.02).abs() < 1e-12);
    assert!((rms(&d, 3..9) - 0.01).abs() < 1e-12);
}

#[test]
fn smoothing_white_noise_reduces_rms_by_bandwidth_ratio() {
    let (n, rate, cutoff) = (4096, 40_000.0, 500.0);
    let clean = constant(n, rate);
    let noisy = perturb_trajectory(&clean, &NoiseSpec::white(rate, 0.01, 0.01), 21).unwrap();
    let smooth = fourier_smooth(&noisy, &LowpassSpec::new(cutoff)).unwrap();
    let before = rms(&diff(&noisy, &clean), 0..9);
    let after = rms(&diff(&smooth, &clean), 0..9);
    let bound = ((rate / 2.0) / cutoff).sqrt() / 2.0;
    assert!(before / after >= bound, "reduction {} < {bound}", before / after);
}

#[test]
fn out_of_band_noise_penalty_is_its_energy() {
    let (n, rate) = (3000, 10_000.0);
    let clean = constant(n, rate);
    let noise = NoiseSpec {
        band_hz: (800.0, rate / 2.0),
        translation_sigma: 0.03,
        rotation_sigma: 0.02,
    };
    let noisy = perturb_trajectory(&clean, &noise, 2).unwrap();
    let energy: f64 = diff(&noisy, &clean).iter().flatten().map(|v| v * v).sum();
    let lambda = 0.1;
    let pen = smoothing_penalty(&noisy, &LowpassSpec::brick_wall(500.0), lambda).unwrap();
    assert!((pen.loss - lambda * energy).abs() <= 1e-6 * lambda * energy, "{} vs {}", pen.loss, lambda * energy);
}

fn analytic(k: f64) -> Pose {
    orbit_pose(3.0, 0.013 * k, 0.25).unwrap()
}

#[test]
fn dense_interpolation_at_21x_is_within_curvature_bound() {
    let h = 21usize;
    let n_anchors = 12;
    let anchors: Vec<_> = (0..n_anchors).map(|a| (a * h, analytic((a * h) as f64).to_row())).collect();
    let dense = interpolate_poses(&anchors, 1000.0).unwrap();
    assert_eq!(dense.len(), (n_anchors - 1) * h + 1);

    // Second-derivative bounds of the analytic path, by central differences.
    let last = ((n_anchors - 1) * h) as f64;
    let (mut acc_t, mut acc_r) = (0.0f64, 0.0f64);
    let dk = 0.5;
    let mut k = dk;
    while k < last {
        let (a, b, c) = (analytic(k - dk), analytic(k), analytic(k + dk));
        acc_t = acc_t.max(((a.translation - 2.0 * b.translation + c.translation) / (dk * dk)).norm());
        let step = rotation_angle_between(&a.rotation, &b.rotation);
        let step2 = rotation_angle_between(&b.rotation, &c.rotation);
        acc_r = acc_r.max((step2 - step).abs() / (dk * dk));
        k += dk;
    }
    let bound_t = (h * h) as f64 / 8.0 * acc_t;
    // acos-based angles resolve nothing below ~sqrt(2 eps).
    let bound_r = (h * h) as f64 / 8.0 * acc_r + 1e-7;

    let (mut err_t, mut err_r) = (0.0f64, 0.0f64);
    for i in 0..dense.len() {
        let p = dense.pose(i);
        let q = analytic(i as f64);
        err_t = err_t.max((p.translation - q.translation).norm());
        err_r = err_r.max(rotation_angle_between(&p.rotation, &q.rotation));
    }
    assert!(err_t <= bound_t, "{err_t} > {bound_t}");
    assert!(err_r <= bound_r, "{err_r} > {bound_r}");
    assert!(err_t > 0.1 * bound_t, "bound is not exercised: {err_t} vs {bound_t}");
}
