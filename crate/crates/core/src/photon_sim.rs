//! Single-photon and conventional camera simulation.
//!
//! Ground-truth flux frames come from rendering a [`Medium`] along a pose
//! trajectory with the same quadrature the reconstructor uses; the
//! detection-probability value of each ray is scaled by `flux_scale` photons
//! per second.

use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, Pose};
use crate::field::{render_value, Medium};
use crate::frame_store::{BinaryFrame, DefectMask, Defect};
use crate::image::{FloatImage, FluxImage};
use crate::pose::PoseTrajectory;
use crate::rng::{counter_uniform, StreamRng};
use crate::{Error, Result};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpcConfig {
    /// Per-frame exposure in seconds.
    pub tau: f64,
    pub frame_rate: f64,
    /// Multiplier on flux standing in for quantum efficiency and aperture.
    #[serde(default = "one")]
    pub quantum_scale: f64,
    /// Spurious detections per second, added to the scaled flux.
    #[serde(default)]
    pub dark_count_rate: f64,
}

impl SpcConfig {
    pub fn new(tau: f64, frame_rate: f64) -> Result<Self> {
        let cfg = Self {
            tau,
            frame_rate,
            quantum_scale: 1.0,
            dark_count_rate: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Exposure equal to the full frame period.
    pub fn at_rate(frame_rate: f64) -> Result<Self> {
        Self::new(1.0 / frame_rate, frame_rate)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.frame_rate > 0.0) {
            return Err(Error::invalid("tau and frame_rate must be positive"));
        }
        if self.tau * self.frame_rate > 1.0 + 1e-9 {
            return Err(Error::invalid(format!(
                "tau {} exceeds the frame period {}",
                self.tau,
                1.0 / self.frame_rate
            )));
        }
        if !(self.quantum_scale >= 0.0) || !(self.dark_count_rate >= 0.0) {
            return Err(Error::invalid("quantum_scale and dark_count_rate must be non-negative"));
        }
        Ok(())
    }

    /// `P(B = 1)` for a pixel receiving `flux` photons per second.
    #[inline]
    pub fn detection_probability(&self, flux: f64) -> f64 {
        -(-(flux * self.quantum_scale + self.dark_count_rate) * self.tau).exp_m1()
    }
}

fn default_gamma() -> f64 {
    1.0 / 2.2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionalConfig {
    /// Integration window in seconds.
    pub exposure: f64,
    /// Full-well capacity in electrons.
    pub full_well: f64,
    /// Read-noise standard deviation in electrons.
    pub read_noise_sigma: f64,
    /// Electrons per detected photon.
    #[serde(default = "one")]
    pub gain: f64,
    /// Exponent of the response `f(x) = x^gamma` applied after normalisation.
    #[serde(default = "default_gamma")]
    pub response_gamma: f64,
    /// Constant offset in electrons added before read noise.
    #[serde(default)]
    pub black_level: f64,
    #[serde(default = "one")]
    pub quantum_scale: f64,
}

impl ConventionalConfig {
    pub fn new(exposure: f64, full_well: f64, read_noise_sigma: f64) -> Result<Self> {
        let cfg = Self {
            exposure,
            full_well,
            read_noise_sigma,
            gain: 1.0,
            response_gamma: default_gamma(),
            black_level: 0.0,
            quantum_scale: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exposure > 0.0) {
            return Err(Error::invalid("exposure must be positive"));
        }
        if !(self.full_well > 0.0) {
            return Err(Error::invalid("full_well must be positive"));
        }
        if !(self.read_noise_sigma >= 0.0) {
            return Err(Error::invalid("read_noise_sigma must be non-negative"));
        }
        if !(self.gain > 0.0 && self.response_gamma > 0.0) {
            return Err(Error::invalid("gain and response_gamma must be positive"));
        }
        if !(self.black_level >= 0.0 && self.quantum_scale >= 0.0) {
            return Err(Error::invalid("black_level and quantum_scale must be non-negative"));
        }
        Ok(())
    }

    /// `f`: normalised electrons to intensity.
    pub fn response(&self, x: f64) -> f64 {
        x.clamp(0.0, 1.0).powf(self.response_gamma)
    }

    /// `f⁻¹`: intensity back to normalised electrons.
    pub fn inverse_response(&self, intensity: f64) -> f64 {
        intensity.clamp(0.0, 1.0).powf(1.0 / self.response_gamma)
    }

    /// Expected linear flux (photons/s) implied by an intensity, ignoring the
    /// clip and subtracting the black level.
    pub fn intensity_to_flux(&self, intensity: f64) -> f64 {
        let electrons = self.inverse_response(intensity) * self.full_well - self.black_level;
        (electrons / (self.gain * self.quantum_scale.max(f64::MIN_POSITIVE) * self.exposure)).max(0.0)
    }
}

/// One Bernoulli frame. Pixel `i` draws `counter_uniform(seed, i)`, so the
/// result is independent of evaluation order.
pub fn sample_binary_frame(flux: &FluxImage, cfg: &SpcConfig, seed: u64) -> Result<BinaryFrame> {
    cfg.validate()?;
    let bits = flux
        .values()
        .iter()
        .enumerate()
        .map(|(i, &phi)| (counter_uniform(seed, i as u64) < cfg.detection_probability(phi as f64)) as u8)
        .collect();
    BinaryFrame::new(flux.width(), flux.height(), bits)
}

/// Photon count with mean `flux_tau`.
pub fn sample_poisson_count(flux_tau: f64, seed: u64) -> Result<u64> {
    let mut rng = StreamRng::new(seed, 0);
    poisson(flux_tau, &mut rng)
}

fn poisson(mean: f64, rng: &mut StreamRng) -> Result<u64> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::invalid(format!("Poisson mean must be finite and >= 0, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

/// `n` independent counts with mean `flux_tau` from one stream.
pub fn sample_poisson_counts(flux_tau: f64, n: usize, seed: u64) -> Result<Vec<u64>> {
    let mut rng = StreamRng::new(seed, 0);
    if flux_tau == 0.0 {
        poisson(0.0, &mut rng)?;
        return Ok(vec![0; n]);
    }
    let dist = Poisson::new(flux_tau).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((0..n).map(|_| dist.sample(&mut rng) as u64).collect())
}

/// `I = f(clip(min(gain·k, FWC) + black + N) / FWC)` with `k ~ Poisson(φ·T)`.
/// `flux` is the mean flux over the exposure window.
pub fn sample_conventional_frame(flux: &FluxImage, cfg: &ConventionalConfig, seed: u64) -> Result<FloatImage> {
    cfg.validate()?;
    let read = Normal::new(0.0, cfg.read_noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut data = Vec::with_capacity(flux.values().len());
    for (i, &phi) in flux.values().iter().enumerate() {
        let mut rng = StreamRng::new(seed, i as u64);
        let k = poisson(phi as f64 * cfg.quantum_scale * cfg.exposure, &mut rng)?;
        let mut electrons = (cfg.gain * k as f64).min(cfg.full_well) + cfg.black_level;
        if cfg.read_noise_sigma > 0.0 {
            electrons += read.sample(&mut rng);
        }
        data.push(cfg.response(electrons / cfg.full_well) as f32);
    }
    FloatImage::new(flux.width(), flux.height(), data)
}

/// Forces masked pixels to their stuck value.
pub fn apply_defects(frame: &mut BinaryFrame, mask: &DefectMask) -> Result<()> {
    mask.check_dims(frame.width(), frame.height())?;
    for (i, d) in mask.defects().iter().enumerate() {
        match d {
            Some(Defect::Dead) => frame.bits_mut()[i] = 0,
            Some(Defect::Hot) => frame.bits_mut()[i] = 1,
            None => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Photons per second for a rendered value of 1.
    pub flux_scale: f64,
    pub n_samples: usize,
    pub near: f64,
    pub far: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            flux_scale: 1.0,
            n_samples: 64,
            near: 0.0,
            far: 100.0,
        }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.flux_scale >= 0.0 && self.flux_scale.is_finite()) {
            return Err(Error::invalid("flux_scale must be finite and non-negative"));
        }
        if self.n_samples < 2 {
            return Err(Error::invalid("n_samples must be at least 2"));
        }
        if !(self.near >= 0.0 && self.near < self.far) {
            return Err(Error::invalid("need 0 <= near < far"));
        }
        Ok(())
    }
}

/// Flux image seen from one pose.
pub fn render_flux<M: Medium + ?Sized>(
    medium: &M,
    pose: &Pose,
    intrinsics: &CameraIntrinsics,
    opts: &RenderOptions,
) -> Result<FluxImage> {
    use rayon::prelude::*;
    opts.validate()?;
    intrinsics.validate()?;
    let (w, h) = (intrinsics.width, intrinsics.height);
    let mut values = vec![0.0f32; w * h];
    values.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
        for (col, v) in out.iter_mut().enumerate() {
            let ray = pose.ray(intrinsics, row, col, opts.near, opts.far);
            *v = (render_value(medium, &ray, opts.n_samples) * opts.flux_scale) as f32;
        }
    });
    FluxImage::new(w, h, values)
}

/// Lazily renders one flux image per trajectory pose.
pub struct TrajectoryRenderer<'a, M: Medium + ?Sized> {
    medium: &'a M,
    poses: Vec<Pose>,
    intrinsics: CameraIntrinsics,
    opts: RenderOptions,
    next: usize,
}

impl<M: Medium + ?Sized> Iterator for TrajectoryRenderer<'_, M> {
    type Item = Result<FluxImage>;

    fn next(&mut self) -> Option<Self::Item> {
        let pose = self.poses.get(self.next)?;
        self.next += 1;
        Some(render_flux(self.medium, pose, &self.intrinsics, &self.opts))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.poses.len() - self.next;
        (left, Some(left))
    }
}

pub fn render_trajectory<'a, M: Medium + ?Sized>(
    medium: &'a M,
    trajectory: &PoseTrajectory,
    intrinsics: &CameraIntrinsics,
    opts: &RenderOptions,
) -> Result<TrajectoryRenderer<'a, M>> {
    opts.validate()?;
    intrinsics.validate()?;
    let poses = (0..trajectory.len()).map(|i| trajectory.pose(i)).collect();
    Ok(TrajectoryRenderer {
        medium,
        poses,
        intrinsics: *intrinsics,
        opts: *opts,
        next: 0,
    })
}

/// Like [`render_trajectory`] but checks that the trajectory supplies exactly
/// `frames` poses.
pub fn render_frames<'a, M: Medium + ?Sized>(
    medium: &'a M,
    trajectory: &PoseTrajectory,
    intrinsics: &CameraIntrinsics,
    opts: &RenderOptions,
    frames: usize,
) -> Result<TrajectoryRenderer<'a, M>> {
    if trajectory.len() != frames {
        return Err(Error::mismatch(format!("{frames} poses"), format!("{} poses", trajectory.len())));
    }
    render_trajectory(medium, trajectory, intrinsics, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flux_gives_zero_frame() {
        let flux = FluxImage::constant(7, 3, 0.0).unwrap();
        let cfg = SpcConfig::at_rate(1e4).unwrap();
        for seed in 0..5 {
            let f = sample_binary_frame(&flux, &cfg, seed).unwrap();
            assert_eq!(f.count_ones(), 0);
        }
    }

    #[test]
    fn binary_frames_are_seed_deterministic() {
        let flux = FluxImage::constant(16, 16, 5000.0).unwrap();
        let cfg = SpcConfig::at_rate(1e4).unwrap();
        assert_eq!(sample_binary_frame(&flux, &cfg, 3).unwrap(), sample_binary_frame(&flux, &cfg, 3).unwrap());
        assert_ne!(sample_binary_frame(&flux, &cfg, 3).unwrap(), sample_binary_frame(&flux, &cfg, 4).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(SpcConfig::new(2e-4, 1e4).is_err());
        assert!(SpcConfig::new(0.0, 1e4).is_err());
        assert!(ConventionalConfig::new(0.01, 0.0, 1.0).is_err());
        assert!(ConventionalConfig::new(0.01, 100.0, -1.0).is_err());
    }

    #[test]
    fn poisson_rejects_negative_mean() {
        assert!(sample_poisson_count(-1.0, 0).is_err());
        assert_eq!(sample_poisson_count(0.0, 9).unwrap(), 0);
    }

    #[test]
    fn conventional_saturates_and_blacks_out() {
        let cfg = ConventionalConfig::new(0.01, 1000.0, 0.0).unwrap();
        let bright = FluxImage::constant(4, 4, 1e9).unwrap();
        assert!(sample_conventional_frame(&bright, &cfg, 1).unwrap().data().iter().all(|&v| v == 1.0));
        let dark = FluxImage::constant(4, 4, 0.0).unwrap();
        assert!(sample_conventional_frame(&dark, &cfg, 1).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_flux_is_rejected_at_construction() {
        assert!(FluxImage::new(1, 1, vec![-1.0]).is_err());
        assert!(FluxImage::new(1, 1, vec![f32::NAN]).is_err());
    }
}
