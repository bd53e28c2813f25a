use rayon::prelude::*;

use crate::camera::{CameraIntrinsics, Pose};
use crate::field::{invert_flux, render_value, tonemap, Medium};
use crate::image::{FloatImage, FluxImage};
use crate::photon_sim::{ConventionalConfig, SpcConfig};
use crate::trainer::metrics::{psnr, ssim};
use crate::{Error, Result};

/// How a rendered field value maps back to linear flux (photons/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputMapping {
    /// Value is a detection probability; invert the Bernoulli response.
    Quanta(SpcConfig),
    /// Value is a conventional intensity; invert the camera response.
    Conventional(ConventionalConfig),
    /// Value times a constant.
    Linear(f64),
}

impl OutputMapping {
    pub fn to_flux(&self, value: f64) -> f64 {
        match self {
            OutputMapping::Quanta(cfg) => {
                let p = value.clamp(0.0, 1.0);
                let rate = invert_flux(p, cfg.tau).map(|e| e.flux).unwrap_or(0.0);
                ((rate - cfg.dark_count_rate) / cfg.quantum_scale).max(0.0)
            }
            OutputMapping::Conventional(cfg) => cfg.intensity_to_flux(value),
            OutputMapping::Linear(s) => value.max(0.0) * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub n_samples: usize,
    pub near: f64,
    pub far: f64,
    /// Display gamma for tonemapping.
    pub gamma: f64,
    /// Flux mapped to display white; defaults to the brightest ground-truth pixel.
    pub white: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n_samples: 64,
            near: 0.0,
            far: 100.0,
            gamma: 2.4,
            white: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutMetrics {
    pub psnr: f64,
    pub ssim: f64,
    pub per_view: Vec<(f64, f64)>,
}

/// Renders `medium` from `pose` and maps every value to flux.
pub fn render_field_flux<M: Medium + ?Sized>(
    medium: &M,
    pose: &Pose,
    intrinsics: &CameraIntrinsics,
    mapping: &OutputMapping,
    opts: &EvalOptions,
) -> Result<FluxImage> {
    let (w, h) = (intrinsics.width, intrinsics.height);
    let mut values = vec![0.0f32; w * h];
    values.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
        for (col, v) in out.iter_mut().enumerate() {
            let ray = pose.ray(intrinsics, row, col, opts.near, opts.far);
            *v = mapping.to_flux(render_value(medium, &ray, opts.n_samples)) as f32;
        }
    });
    FluxImage::new(w, h, values)
}

/// Mean PSNR and SSIM of tonemapped renders against tonemapped ground truth.
pub fn evaluate_holdout<M: Medium + ?Sized>(
    medium: &M,
    poses: &[Pose],
    intrinsics: &CameraIntrinsics,
    ground_truth: &[FluxImage],
    mapping: &OutputMapping,
    opts: &EvalOptions,
) -> Result<HoldoutMetrics> {
    if poses.len() != ground_truth.len() || poses.is_empty() {
        return Err(Error::mismatch(format!("{} holdout images", poses.len()), ground_truth.len()));
    }
    let white = opts.white.unwrap_or_else(|| {
        ground_truth.iter().map(|g| g.as_image().max_value() as f64).fold(0.0, f64::max)
    });
    let white = if white > 0.0 { white } else { 1.0 };
    let mut per_view = Vec::with_capacity(poses.len());
    for (pose, gt) in poses.iter().zip(ground_truth) {
        let pred = render_field_flux(medium, pose, intrinsics, mapping, opts)?;
        let (a, _) = tonemap(pred.as_image(), white, opts.gamma);
        let (b, _) = tonemap(gt.as_image(), white, opts.gamma);
        per_view.push((psnr(&a, &b)?, ssim(&a, &b)?));
    }
    let n = per_view.len() as f64;
    Ok(HoldoutMetrics {
        psnr: per_view.iter().map(|v| v.0).sum::<f64>() / n,
        ssim: per_view.iter().map(|v| v.1).sum::<f64>() / n,
        per_view,
    })
}

/// Tonemapped display image.
pub fn display(flux: &FluxImage, white: f64, gamma: f64) -> FloatImage {
    tonemap(flux.as_image(), white, gamma).0
}
