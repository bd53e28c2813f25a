//! Joint optimisation of a voxel field and per-frame poses.
//!
//! Each step draws a uniform minibatch of observations, builds one ray per
//! observation from its frame's current pose, renders and backpropagates
//! through the field and (after a warm-up) through the pose rows, adds the
//! Fourier lowpass penalty on the trajectory, and applies Adam.
//!
//! Rays are processed in fixed-size chunks with one gradient buffer per chunk;
//! buffers are reduced in chunk order, so a run is bit-identical for any
//! number of worker threads.

mod adam;
mod eval;
mod loss;
pub mod metrics;
mod observe;

pub use adam::Adam;
pub use eval::{display, evaluate_holdout, render_field_flux, EvalOptions, HoldoutMetrics, OutputMapping};
pub use loss::{conventional_loss, quanta_loss};
pub use observe::{ConventionalFrames, LossKind, Observation, ObservationSource};

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{Aabb, CameraIntrinsics, PoseRay};
use crate::field::{forward_backward, logit, render_value, VoxelField};
use crate::pose::{LowpassSpec, PenaltyNormalization, PoseRow, PoseTrajectory, Smoother};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Rays per gradient buffer.
pub const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub field_lr: f64,
    pub pose_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lambda: f64,
    pub lowpass: LowpassSpec,
    pub penalty_normalization: PenaltyNormalization,
    pub n_samples: usize,
    pub seed: u64,
    /// First iteration at which poses move; defaults to 10% of `iterations`.
    pub pose_opt_start_iteration: Option<usize>,
    pub optimize_poses: bool,
    /// Start the albedo at the level that reproduces the mean observation
    /// instead of 0.5. Helps very dark captures, where reaching tiny
    /// detection probabilities from 0.5 takes thousands of Adam steps.
    pub init_albedo_from_data: bool,
    /// Cosine decay of both learning rates down to `lr_floor` times the base.
    pub cosine_decay: bool,
    pub lr_floor: f64,
    pub resolution: [usize; 3],
    pub bounds: Aabb,
    pub near: f64,
    pub far: f64,
    /// Record a [`LossReport`] every this many iterations (and at the last).
    pub log_every: usize,
    /// Where to write the field and poses if the loss becomes non-finite.
    pub diagnostic_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            batch_size: 2048,
            field_lr: 1e-2,
            pose_lr: 1e-4,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-15,
            lambda: 0.1,
            lowpass: LowpassSpec::default(),
            penalty_normalization: PenaltyNormalization::Sum,
            n_samples: 32,
            seed: 0,
            pose_opt_start_iteration: None,
            optimize_poses: true,
            init_albedo_from_data: false,
            cosine_decay: false,
            lr_floor: 0.0,
            resolution: [16; 3],
            bounds: Aabb::cube(1.0),
            near: 0.0,
            far: 100.0,
            log_every: 1,
            diagnostic_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn pose_start(&self) -> usize {
        self.pose_opt_start_iteration.unwrap_or(self.iterations / 10)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.iterations == 0 || self.batch_size == 0 || self.log_every == 0 {
            return bad("iterations, batch_size and log_every must be positive");
        }
        if !(self.field_lr > 0.0 && self.pose_lr >= 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("need 0 <= beta1, beta2 < 1 and eps > 0");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if self.n_samples < 2 {
            return bad("n_samples must be at least 2");
        }
        if self.pose_start() > self.iterations {
            return bad("pose_opt_start_iteration exceeds iterations");
        }
        if !(0.0..=1.0).contains(&self.lr_floor) {
            return bad("lr_floor must lie in [0, 1]");
        }
        if !(self.near >= 0.0 && self.near < self.far) {
            return bad("need 0 <= near < far");
        }
        self.lowpass.validate().map_err(|e| Error::Config(e.to_string()))?;
        Aabb::new(self.bounds.min, self.bounds.max).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    fn lr_scale(&self, iteration: usize) -> f64 {
        if !self.cosine_decay {
            return 1.0;
        }
        let x = iteration as f64 / self.iterations as f64;
        self.lr_floor + (1.0 - self.lr_floor) * 0.5 * (1.0 + (std::f64::consts::PI * x).cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub iteration: usize,
    pub photometric: f64,
    /// Unweighted trajectory residual energy.
    pub regularizer: f64,
    /// `photometric + lambda * regularizer`.
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub field: VoxelField,
    pub poses: PoseTrajectory,
    pub history: Vec<LossReport>,
}

/// Snapshot handed to the per-step hook.
pub struct TrainState<'a> {
    pub iteration: usize,
    pub field: &'a VoxelField,
    pub poses: &'a PoseTrajectory,
    pub report: &'a LossReport,
}

pub fn train(
    source: &dyn ObservationSource,
    initial_poses: &PoseTrajectory,
    intrinsics: &CameraIntrinsics,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    train_with(source, initial_poses, intrinsics, cfg, None, &mut |_| Ok(()))
}

struct ChunkGrad {
    field: Vec<f64>,
    poses: Vec<(usize, PoseRow)>,
    sq_err: f64,
}

/// [`train`] with an optional starting field and a hook run after every step.
pub fn train_with(
    source: &dyn ObservationSource,
    initial_poses: &PoseTrajectory,
    intrinsics: &CameraIntrinsics,
    cfg: &TrainConfig,
    init_field: Option<VoxelField>,
    hook: &mut dyn FnMut(&TrainState) -> Result<()>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    intrinsics.validate()?;
    if initial_poses.len() != source.frame_count() {
        return Err(Error::mismatch(
            format!("{} poses", source.frame_count()),
            format!("{} poses", initial_poses.len()),
        ));
    }
    if (intrinsics.width, intrinsics.height) != (source.width(), source.height()) {
        return Err(Error::mismatch(
            format!("{}x{} sensor", source.width(), source.height()),
            format!("{}x{} intrinsics", intrinsics.width, intrinsics.height),
        ));
    }
    let mut field = match init_field {
        Some(f) => f,
        None => VoxelField::initial(cfg.resolution, cfg.bounds)?,
    };
    let mut poses = initial_poses.clone();
    if cfg.init_albedo_from_data {
        init_albedo(source, &poses, intrinsics, cfg, &mut field)?;
    }
    let n_frames = poses.len();
    let smoother = if cfg.lambda > 0.0 && n_frames >= 2 {
        Some(Smoother::new(n_frames, poses.frame_rate(), &cfg.lowpass)?)
    } else {
        None
    };

    let mut field_adam = Adam::new(field.params().len(), cfg.beta1, cfg.beta2, cfg.eps);
    let mut pose_adam = Adam::new(9 * n_frames, cfg.beta1, cfg.beta2, cfg.eps);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut field_grad = vec![0.0; field.params().len()];
    let mut pose_grad = vec![0.0; 9 * n_frames];
    let mut history = Vec::new();
    let inv_batch = 2.0 / cfg.batch_size as f64;

    for it in 0..cfg.iterations {
        let pose_active = cfg.optimize_poses && cfg.pose_lr > 0.0 && it >= cfg.pose_start();
        source.sample(cfg.batch_size, derive_seed(cfg.seed, it as u64), &mut batch)?;

        let chunks: Vec<Result<ChunkGrad>> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut out = ChunkGrad {
                    field: vec![0.0; field.params().len()],
                    poses: Vec::new(),
                    sq_err: 0.0,
                };
                for obs in chunk {
                    let row = poses.row(obs.frame);
                    let pr = PoseRay::new(intrinsics, row, (obs.row, obs.col), cfg.near, cfg.far)?;
                    let mut sq = 0.0;
                    let (_, rg) = forward_backward(
                        &field,
                        &pr.ray,
                        cfg.n_samples,
                        |v| {
                            let d = v - obs.value;
                            sq = d * d;
                            inv_batch * d
                        },
                        &mut out.field,
                        pose_active,
                    );
                    out.sq_err += sq;
                    if pose_active {
                        out.poses.push((obs.frame, pr.backward(row, &rg.origin, &rg.direction)));
                    }
                }
                Ok(out)
            })
            .collect();

        field_grad.iter_mut().for_each(|g| *g = 0.0);
        pose_grad.iter_mut().for_each(|g| *g = 0.0);
        let mut sq_err = 0.0;
        for chunk in chunks {
            let chunk = chunk?;
            sq_err += chunk.sq_err;
            for (g, c) in field_grad.iter_mut().zip(&chunk.field) {
                *g += c;
            }
            for (frame, g) in chunk.poses {
                for j in 0..9 {
                    pose_grad[9 * frame + j] += g[j];
                }
            }
        }
        let photometric = sq_err / cfg.batch_size as f64;

        let mut regularizer = 0.0;
        if let Some(smoother) = &smoother {
            let pen = smoother.penalty(poses.rows(), cfg.lambda, cfg.penalty_normalization)?;
            regularizer = pen.energy;
            if pose_active {
                for (f, g) in pen.gradient.iter().enumerate() {
                    for j in 0..9 {
                        pose_grad[9 * f + j] += g[j];
                    }
                }
            }
        }
        let report = LossReport {
            iteration: it,
            photometric,
            regularizer,
            total: photometric + cfg.lambda * regularizer,
        };
        if !report.total.is_finite() || field_grad.iter().any(|g| !g.is_finite()) {
            return Err(diverged(cfg, it, &field, &poses));
        }

        let scale = cfg.lr_scale(it);
        field_adam.step(field.params_mut(), &field_grad, cfg.field_lr * scale);
        if pose_active {
            pose_adam.step(poses.rows_mut().as_flattened_mut(), &pose_grad, cfg.pose_lr * scale);
            if poses.rows().iter().flatten().any(|v| !v.is_finite()) {
                return Err(diverged(cfg, it, &field, &poses));
            }
        }
        if it % cfg.log_every == 0 || it + 1 == cfg.iterations {
            history.push(report);
        }
        hook(&TrainState {
            iteration: it,
            field: &field,
            poses: &poses,
            report: &report,
        })?;
    }

    Ok(TrainOutput { field, poses, history })
}

/// Sets every albedo so that the mean rendered value over a probe batch
/// matches the mean observation, keeping the current densities.
fn init_albedo(
    source: &dyn ObservationSource,
    poses: &PoseTrajectory,
    intrinsics: &CameraIntrinsics,
    cfg: &TrainConfig,
    field: &mut VoxelField,
) -> Result<()> {
    let mut batch = Vec::new();
    source.sample(32 * cfg.batch_size, derive_seed(cfg.seed, u64::MAX), &mut batch)?;
    let mut observed = 0.0;
    let mut opacity = 0.0;
    let mut opaque = field.clone();
    for p in opaque.params_mut().chunks_exact_mut(2) {
        p[1] = 40.0;
    }
    for obs in &batch {
        let pr = PoseRay::new(intrinsics, poses.row(obs.frame), (obs.row, obs.col), cfg.near, cfg.far)?;
        observed += obs.value;
        opacity += render_value(&opaque, &pr.ray, cfg.n_samples);
    }
    if opacity > 0.0 {
        let a = logit((observed / opacity).clamp(1e-6, 1.0 - 1e-6));
        for p in field.params_mut().chunks_exact_mut(2) {
            p[1] = a;
        }
    }
    Ok(())
}

fn diverged(cfg: &TrainConfig, it: usize, field: &VoxelField, poses: &PoseTrajectory) -> Error {
    let mut msg = format!("non-finite loss or gradient at iteration {it}");
    if let Some(dir) = &cfg.diagnostic_dir {
        let written = std::fs::create_dir_all(dir)
            .map_err(Error::from)
            .and_then(|_| field.save(dir.join("diverged.qrffield")))
            .and_then(|_| write_rows_csv(poses, &dir.join("diverged_poses.csv")));
        match written {
            Ok(()) => msg.push_str(&format!("; diagnostic checkpoint in {}", dir.display())),
            Err(e) => msg.push_str(&format!("; diagnostic checkpoint failed: {e}")),
        }
    }
    Error::Numerical(msg)
}

/// Writes pose rows even if some fail validation.
fn write_rows_csv(poses: &PoseTrajectory, path: &std::path::Path) -> Result<()> {
    let rows: Vec<(usize, PoseRow)> = poses.rows().iter().copied().enumerate().collect();
    crate::pose::write_indexed_csv(path, poses.frame_rate(), &rows)
}
