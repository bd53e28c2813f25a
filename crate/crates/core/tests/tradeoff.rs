//! Virtual-exposure blur/noise tradeoff on synthetic edges.

use qrf_core::bench::{tradeoff_curve, BlurNoiseSpec};
use qrf_core::photon_sim::SpcConfig;

fn spec(n_values: Vec<usize>) -> BlurNoiseSpec {
    BlurNoiseSpec {
        width: 64,
        height: 24,
        frames: 1024,
        velocity: 0.04,
        n_values,
        flux_bright: 8000.0,
        flux_dark: 1000.0,
        windows: 4,
    }
}

#[test]
fn static_edge_noise_halves_per_four_fold_exposure() {
    let dir = tempfile::tempdir().unwrap();
    let spc = SpcConfig::at_rate(1e4).unwrap();
    let s = spec(vec![4, 16, 64, 256]);
    let curve = tradeoff_curve(&s, &spc, 0.0, 3, dir.path()).unwrap();
    let blur0 = curve.points[0].2;
    for w in curve.points.windows(2) {
        let ratio = w[1].1 / w[0].1;
        assert!((ratio - 0.5).abs() < 0.1, "noise ratio {ratio} between n={} and n={}", w[0].0, w[1].0);
        assert!((w[1].2 - blur0).abs() < 1e-9, "static blur changed");
    }
}

#[test]
fn moving_edge_blur_grows_with_n_v() {
    let dir = tempfile::tempdir().unwrap();
    let spc = SpcConfig::at_rate(1e4).unwrap();
    let s = spec(vec![128, 256, 512]);
    let curve = tradeoff_curve(&s, &spc, s.velocity, 4, dir.path()).unwrap();
    for &(n, _, blur) in &curve.points {
        // 10-90% width of a box-blurred step of length L is 0.8 L.
        let oracle = 0.8 * n as f64 * s.velocity;
        assert!((blur - oracle).abs() < 0.2 * oracle, "n={n}: blur {blur} vs {oracle}");
    }
}
