//! Matched-capture simulation of single-photon and conventional cameras.

use std::path::Path;

use crate::camera::CameraIntrinsics;
use crate::field::Medium;
use crate::frame_store::{StoreHeader, StoreMeta, StoreWriter};
use crate::image::{FloatImage, FluxImage};
use crate::photon_sim::{render_flux, sample_binary_frame, sample_conventional_frame, ConventionalConfig, RenderOptions, SpcConfig};
use crate::pose::PoseTrajectory;
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Ground-truth flux along a trajectory, rendered at every `stride`-th frame
/// (and the last) and linearly interpolated in between.
#[derive(Debug, Clone)]
pub struct FluxSequence {
    keyframes: Vec<(usize, FluxImage)>,
    len: usize,
}

impl FluxSequence {
    pub fn render<M: Medium + ?Sized>(
        medium: &M,
        trajectory: &PoseTrajectory,
        intrinsics: &CameraIntrinsics,
        opts: &RenderOptions,
        stride: usize,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::invalid("keyframe stride must be positive"));
        }
        let len = trajectory.len();
        let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
        if *idx.last().unwrap() != len - 1 {
            idx.push(len - 1);
        }
        let keyframes = idx
            .into_iter()
            .map(|k| Ok((k, render_flux(medium, &trajectory.pose(k), intrinsics, opts)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { keyframes, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn dims(&self) -> (usize, usize) {
        let f = &self.keyframes[0].1;
        (f.width(), f.height())
    }

    /// Accumulates `weight * frame(k)` into `acc`.
    fn accumulate(&self, k: usize, weight: f64, acc: &mut [f64]) {
        let pos = self.keyframes.partition_point(|(i, _)| *i <= k);
        let (i0, f0) = &self.keyframes[pos - 1];
        if *i0 == k || pos == self.keyframes.len() {
            for (a, v) in acc.iter_mut().zip(f0.values()) {
                *a += weight * *v as f64;
            }
            return;
        }
        let (i1, f1) = &self.keyframes[pos];
        let t = (k - i0) as f64 / (i1 - i0) as f64;
        for ((a, v0), v1) in acc.iter_mut().zip(f0.values()).zip(f1.values()) {
            *a += weight * ((1.0 - t) * *v0 as f64 + t * *v1 as f64);
        }
    }

    pub fn frame(&self, k: usize) -> FluxImage {
        self.mean(k, 1)
    }

    /// Mean flux over frames `start..start + n`.
    pub fn mean(&self, start: usize, n: usize) -> FluxImage {
        let (w, h) = self.dims();
        let mut acc = vec![0.0; w * h];
        for k in start..start + n {
            self.accumulate(k, 1.0 / n as f64, &mut acc);
        }
        FluxImage::new(w, h, acc.into_iter().map(|v| v.max(0.0) as f32).collect()).expect("finite flux")
    }

    /// Mean over all frames of mean photons per pixel per frame at exposure `tau`.
    pub fn mean_photons_per_frame(&self, tau_scaled: f64) -> f64 {
        let total: f64 = self.keyframes.iter().map(|(_, f)| f.as_image().mean()).sum();
        total / self.keyframes.len() as f64 * tau_scaled
    }
}

/// Writes one Bernoulli frame per sequence frame into a store; frame `k` is
/// drawn with seed `derive_seed(seed, k)`.
pub fn simulate_spc_store(path: impl AsRef<Path>, flux: &FluxSequence, spc: &SpcConfig, seed: u64) -> Result<StoreHeader> {
    let (w, h) = flux.dims();
    let mut writer = StoreWriter::create(
        path,
        w,
        h,
        StoreMeta {
            frame_rate: spc.frame_rate,
            tau: spc.tau,
        },
    )?;
    for k in 0..flux.len() {
        writer.push(&sample_binary_frame(&flux.frame(k), spc, derive_seed(seed, k as u64))?)?;
    }
    writer.finish()
}

/// Conventional frames integrating `group` consecutive sequence frames each.
pub fn simulate_conventional(flux: &FluxSequence, group: usize, cfg: &ConventionalConfig, seed: u64) -> Result<Vec<FloatImage>> {
    if group == 0 || !flux.len().is_multiple_of(group) {
        return Err(Error::invalid(format!(
            "{} frames cannot be grouped by {group}",
            flux.len()
        )));
    }
    (0..flux.len() / group)
        .map(|j| sample_conventional_frame(&flux.mean(j * group, group), cfg, derive_seed(seed, j as u64)))
        .collect()
}
