//! Monte-Carlo checks of the sensor models, flux inversion and image metrics.

use qrf_core::field::{binary_mean_to_linear, invert_flux, mle_flux_from_frames};
use qrf_core::frame_store::{BinaryFrame, BinaryFrameStore, StoreMeta, StoreWriter};
use qrf_core::image::{FloatImage, FluxImage};
use qrf_core::photon_sim::{sample_binary_frame, sample_conventional_frame, sample_poisson_counts, ConventionalConfig, SpcConfig};
use qrf_core::trainer::metrics::psnr;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

const TAU: f64 = 1e-4;

fn binary_mean(phi_tau: f64, seed: u64) -> f64 {
    let flux = FluxImage::constant(1000, 1000, (phi_tau / TAU) as f32).unwrap();
    let f = sample_binary_frame(&flux, &SpcConfig::new(TAU, 1e4).unwrap(), seed).unwrap();
    f.count_ones() as f64 / 1e6
}

#[test]
fn bernoulli_mean_at_ln2_is_half() {
    let m = binary_mean(std::f64::consts::LN_2, 11);
    assert!((m - 0.5).abs() < 0.002, "{m}");
}

#[test]
fn bernoulli_mean_at_two_within_three_sigma() {
    let p = 1.0 - (-2.0f64).exp();
    let sd = (p * (1.0 - p) / 1e6).sqrt();
    let m = binary_mean(2.0, 12);
    assert!((m - p).abs() < 3.0 * sd, "{m} vs {p}");
}

#[test]
fn poisson_moments() {
    let c = sample_poisson_counts(3.0, 1_000_000, 5).unwrap();
    let mean = c.iter().sum::<u64>() as f64 / 1e6;
    assert!((mean - 3.0).abs() < 0.01, "{mean}");

    let c = sample_poisson_counts(1.0, 1_000_000, 6).unwrap();
    let p0 = c.iter().filter(|&&k| k == 0).count() as f64 / 1e6;
    let e = (-1.0f64).exp();
    assert!((p0 - e).abs() < 4.0 * (e * (1.0 - e) / 1e6).sqrt(), "{p0}");
}

#[test]
fn conventional_read_noise_moment() {
    let mut cfg = ConventionalConfig::new(0.02, 1000.0, 4.0).unwrap();
    // Offset keeps the noise clear of the clip at zero.
    cfg.black_level = 50.0;
    let flux = FluxImage::constant(1000, 1000, 0.0).unwrap();
    let img = sample_conventional_frame(&flux, &cfg, 3).unwrap();
    let e: Vec<f64> = img.data().iter().map(|&i| cfg.inverse_response(i as f64) * cfg.full_well).collect();
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    let sd = (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (e.len() - 1) as f64).sqrt();
    assert!((sd - 4.0).abs() < 0.08, "{sd}");
}

#[test]
fn mle_flux_within_one_percent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.qrfbin");
    let phi = 1.0 / TAU;
    let spc = SpcConfig::new(TAU, 1e4).unwrap();
    let flux = FluxImage::constant(1, 1, phi as f32).unwrap();
    let mut w = StoreWriter::create(&path, 1, 1, StoreMeta { frame_rate: 1e4, tau: TAU }).unwrap();
    for k in 0..100_000u64 {
        w.push(&sample_binary_frame(&flux, &spc, k).unwrap()).unwrap();
    }
    w.finish().unwrap();
    let store = BinaryFrameStore::open(&path).unwrap();
    let (est, saturated) = mle_flux_from_frames(&store.virtual_exposure(0, 100_000).unwrap(), TAU).unwrap();
    assert_eq!(saturated, 0);
    let rel = (est.values()[0] as f64 - phi).abs() / phi;
    assert!(rel < 0.01, "{rel}");
}

#[test]
fn all_zero_frames_give_zero_flux() {
    let mean = BinaryFrame::zeros(4, 4).to_image();
    let (est, saturated) = mle_flux_from_frames(&mean, TAU).unwrap();
    assert_eq!(saturated, 0);
    assert!(est.values().iter().all(|&v| v == 0.0));
}

#[test]
fn flux_inversion_roundtrip() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(9);
    for _ in 0..10_000 {
        let phi: f64 = rng.random_range(0.0..10.0);
        let tau = 10f64.powf(rng.random_range(-5.0..-2.0));
        let p = -(-phi * tau).exp_m1();
        let back = invert_flux(p, tau).unwrap().flux;
        assert!((back - phi).abs() <= 1e-9 * phi.max(1e-300), "{phi} {tau} {back}");
    }
}

#[test]
fn binary_half_is_ln2_linear() {
    assert!((binary_mean_to_linear(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn psnr_of_sigma_tenth_noise_is_20db() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(4);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let (w, h) = (256, 256);
    let clean = FloatImage::filled(w, h, 0.5);
    let noisy = FloatImage::new(w, h, (0..w * h).map(|_| (0.5 + noise.sample(&mut rng)) as f32).collect()).unwrap();
    let db = psnr(&clean, &noisy).unwrap();
    assert!((db - 20.0).abs() < 0.1, "{db}");
}
