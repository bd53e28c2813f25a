use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::PoseTrajectory;
use crate::rng::StreamRng;
use crate::{Error, Result};

/// Band-limited Gaussian noise added to a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Pass band `[low, high]` in Hz; frequencies outside are removed.
    pub band_hz: (f64, f64),
    /// RMS of the noise added to each translation column (world units).
    pub translation_sigma: f64,
    /// RMS of the noise added to each of the 6 rotation-encoding columns.
    pub rotation_sigma: f64,
}

impl NoiseSpec {
    pub fn white(frame_rate: f64, translation_sigma: f64, rotation_sigma: f64) -> Self {
        Self {
            band_hz: (0.0, frame_rate / 2.0),
            translation_sigma,
            rotation_sigma,
        }
    }
}

/// Gaussian noise of length `n` restricted to `band_hz` in frequency and
/// rescaled to RMS `sigma` (periodic spectrum, exact-length transform).
pub fn band_limited_noise(n: usize, frame_rate: f64, band_hz: (f64, f64), sigma: f64, seed: u64, stream: u64) -> Vec<f64> {
    if sigma == 0.0 || n == 0 {
        return vec![0.0; n];
    }
    let mut rng = StreamRng::new(seed, stream);
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * frame_rate / n as f64;
        if f < band_hz.0 || f > band_hz.1 {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms == 0.0 {
        return x;
    }
    x.into_iter().map(|v| v * sigma / rms).collect()
}

/// Adds independent band-limited noise to each of the 9 columns;
/// deterministic given `seed`.
pub fn perturb_trajectory(trajectory: &PoseTrajectory, noise: &NoiseSpec, seed: u64) -> Result<PoseTrajectory> {
    if !(noise.translation_sigma >= 0.0 && noise.rotation_sigma >= 0.0) {
        return Err(Error::invalid("noise magnitudes must be non-negative"));
    }
    let n = trajectory.len();
    let mut out = trajectory.clone();
    for j in 0..9 {
        let sigma = if j < 3 { noise.translation_sigma } else { noise.rotation_sigma };
        if sigma == 0.0 {
            continue;
        }
        let eta = band_limited_noise(n, trajectory.frame_rate(), noise.band_hz, sigma, seed, j as u64);
        let col: Vec<f64> = trajectory.column(j).iter().zip(&eta).map(|(a, b)| a + b).collect();
        out.set_column(j, &col);
    }
    PoseTrajectory::new(out.rows().to_vec(), trajectory.frame_rate())
}
