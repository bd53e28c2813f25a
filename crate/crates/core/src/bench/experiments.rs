//! Paired quanta-versus-conventional sweeps and the pose-smoothing ablation.

use std::path::Path;

use super::report::{hstack, ExperimentReport};
use super::scenes::{build_scene, GroundTruth};
use super::simulate::{simulate_conventional, simulate_spc_store, FluxSequence};
use super::trajectory::extrapolation_arc;
use super::ExperimentSpec;
use crate::camera::{CameraIntrinsics, Pose};
use crate::field::VoxelField;
use crate::frame_store::BinaryFrameStore;
use crate::image::FluxImage;
use crate::photon_sim::render_flux;
use crate::pose::{perturb_trajectory, PoseTrajectory};
use crate::rng::derive_seed;
use crate::trainer::{display, evaluate_holdout, render_field_flux, train, ConventionalFrames, EvalOptions, OutputMapping, TrainConfig};
use crate::{Error, Result};

/// Everything shared by the runs of one sweep.
struct Capture {
    gt: GroundTruth,
    intrinsics: CameraIntrinsics,
    spc_poses: PoseTrajectory,
    flux: FluxSequence,
}

impl Capture {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        let spc = spec.spc()?;
        let gt = build_scene(spec.scene, spec.scene_resolution)?;
        let intrinsics = spec.sensor.intrinsics()?;
        let spc_poses = spec.trajectory.sample(spc.frames, spc.frame_rate, 0.0)?;
        let flux = FluxSequence::render(
            &gt,
            &spc_poses,
            &intrinsics,
            &spec.render.options(spc.flux_scale),
            spec.render.keyframe_stride,
        )?;
        Ok(Self {
            gt,
            intrinsics,
            spc_poses,
            flux,
        })
    }

    /// Conventional frame `j` is posed at the centre of its exposure window.
    fn conventional_poses(&self, spec: &ExperimentSpec, group: usize) -> Result<PoseTrajectory> {
        let conv = spec.conventional()?;
        let n = self.spc_poses.len() / group;
        let offset = (group as f64 - 1.0) / (2.0 * group as f64);
        spec.trajectory.sample(n, conv.frame_rate, offset)
    }

    fn ground_truth(&self, spec: &ExperimentSpec, poses: &[Pose]) -> Result<Vec<FluxImage>> {
        let opts = spec.render.options(spec.spc()?.flux_scale);
        poses.iter().map(|p| render_flux(&self.gt, p, &self.intrinsics, &opts)).collect()
    }
}

fn eval_options(spec: &ExperimentSpec) -> EvalOptions {
    EvalOptions {
        n_samples: spec.train.n_samples,
        near: spec.train.near,
        far: spec.train.far,
        ..EvalOptions::default()
    }
}

/// Holdout poses on the training trajectory but between training frames.
fn holdout_poses(spec: &ExperimentSpec) -> Result<Vec<Pose>> {
    let v = spec.holdout_views.max(1);
    (0..v).map(|k| spec.trajectory.pose_at((k as f64 + 0.37) / v as f64)).collect()
}

fn train_cfg(spec: &ExperimentSpec, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..spec.train.clone()
    }
}

struct PairedResult {
    quanta: (VoxelField, OutputMapping),
    conventional: (VoxelField, OutputMapping),
}

/// Simulates both cameras at `quantum_scale` and trains one field on each.
fn train_pair(spec: &ExperimentSpec, cap: &Capture, quantum_scale: f64, seed: u64, work_dir: &Path, tag: &str) -> Result<PairedResult> {
    let group = spec.frame_group()?;
    let spc_cfg = spec.spc()?.config(quantum_scale)?;
    let conv_cfg = spec.conventional()?.config(quantum_scale)?;
    let cfg = train_cfg(spec, seed);

    let path = work_dir.join(format!("{tag}_seed{seed}.qrfbin"));
    simulate_spc_store(&path, &cap.flux, &spc_cfg, derive_seed(seed, 1))?;
    let store = BinaryFrameStore::open(&path)?;
    let quanta = train(&store, &cap.spc_poses, &cap.intrinsics, &cfg)?.field;
    drop(store);
    std::fs::remove_file(&path).ok();

    let frames = ConventionalFrames::new(simulate_conventional(&cap.flux, group, &conv_cfg, derive_seed(seed, 2))?)?;
    let conv_poses = cap.conventional_poses(spec, group)?;
    let conventional = train(&frames, &conv_poses, &cap.intrinsics, &cfg)?.field;
    Ok(PairedResult {
        quanta: (quanta, OutputMapping::Quanta(spc_cfg)),
        conventional: (conventional, OutputMapping::Conventional(conv_cfg)),
    })
}

fn white_point(gt: &[FluxImage]) -> f64 {
    gt.iter().map(|g| g.as_image().max_value() as f64).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}

fn panel(
    cap: &Capture,
    pair: &PairedResult,
    pose: &Pose,
    gt: &FluxImage,
    opts: &EvalOptions,
    white: f64,
) -> Result<crate::image::FloatImage> {
    let q = render_field_flux(&pair.quanta.0, pose, &cap.intrinsics, &pair.quanta.1, opts)?;
    let c = render_field_flux(&pair.conventional.0, pose, &cap.intrinsics, &pair.conventional.1, opts)?;
    let imgs = [display(gt, white, opts.gamma), display(&q, white, opts.gamma), display(&c, white, opts.gamma)];
    Ok(hstack(&[&imgs[0], &imgs[1], &imgs[2]]))
}

/// PSNR/SSIM of quanta and conventional reconstructions per light level.
/// Light is scaled by `2^-stops` through `quantum_scale` for both cameras.
pub fn run_lowlight_sweep(spec: &ExperimentSpec, work_dir: &Path) -> Result<ExperimentReport> {
    let cap = Capture::new(spec)?;
    let holdout = holdout_poses(spec)?;
    let gt = cap.ground_truth(spec, &holdout)?;
    let mut opts = eval_options(spec);
    let white = white_point(&gt);
    opts.white = Some(white);
    let spc = spec.spc()?;
    let mut report = ExperimentReport {
        name: spec.name.clone(),
        x_label: "stops below reference".into(),
        ..Default::default()
    };
    for &stops in &spec.stops {
        let q = (-stops).exp2();
        for (i, &seed) in spec.seeds.iter().enumerate() {
            let pair = train_pair(spec, &cap, q, seed, work_dir, &format!("lowlight_{stops}"))?;
            for (method, (field, mapping)) in [("quanta", &pair.quanta), ("conventional", &pair.conventional)] {
                let m = evaluate_holdout(field, &holdout, &cap.intrinsics, &gt, mapping, &opts)?;
                report.push(seed, method, stops, "psnr", m.psnr);
                report.push(seed, method, stops, "ssim", m.ssim);
            }
            if i == 0 {
                report.panels.push((format!("lowlight_stops_{stops}"), panel(&cap, &pair, &holdout[0], &gt[0], &opts, white)?));
            }
        }
        let photons = cap.flux.mean_photons_per_frame(q / spc.frame_rate);
        report.metadata.insert(format!("photons_per_pixel_per_frame_stops_{stops}"), format!("{photons:.6e}"));
    }
    let darkest = spec.stops.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let photons = cap.flux.mean_photons_per_frame((-darkest).exp2() / spc.frame_rate);
    report.metadata.insert("darkest_photons_per_pixel_per_frame".into(), format!("{photons:.6e}"));
    report.metadata.insert("sweep_span_stops".into(), darkest.to_string());
    report.metadata.insert("sweep_contrast_ratio".into(), format!("{:.1}", darkest.exp2()));
    report.metadata.insert("capture_time_s".into(), spc.capture_time().to_string());
    report.metadata.insert("spc_frames".into(), spc.frames.to_string());
    report
        .metadata
        .insert("conventional_frames".into(), (spc.frames / spec.frame_group()?).to_string());
    Ok(report)
}

/// PSNR along a test arc leaving the sinusoidal training orbit at a peak.
pub fn run_extrapolation_sweep(spec: &ExperimentSpec, work_dir: &Path) -> Result<ExperimentReport> {
    let cap = Capture::new(spec)?;
    let arc = extrapolation_arc(&spec.trajectory, &spec.displacements_deg)?;
    let poses: Vec<Pose> = arc.iter().map(|a| a.1).collect();
    let gt = cap.ground_truth(spec, &poses)?;
    let mut opts = eval_options(spec);
    let white = white_point(&gt);
    opts.white = Some(white);
    let spc = spec.spc()?;
    let group = spec.frame_group()?;
    let mut report = ExperimentReport {
        name: spec.name.clone(),
        x_label: "angular displacement (deg)".into(),
        ..Default::default()
    };
    for (i, &seed) in spec.seeds.iter().enumerate() {
        let pair = train_pair(spec, &cap, 1.0, seed, work_dir, "extrapolation")?;
        for (method, (field, mapping)) in [("quanta", &pair.quanta), ("conventional", &pair.conventional)] {
            for (k, (deg, pose)) in arc.iter().enumerate() {
                let m = evaluate_holdout(field, std::slice::from_ref(pose), &cap.intrinsics, &gt[k..k + 1], mapping, &opts)?;
                report.push(seed, method, *deg, "psnr", m.psnr);
                report.push(seed, method, *deg, "ssim", m.ssim);
            }
        }
        if i == 0 {
            for (k, (deg, pose)) in arc.iter().enumerate() {
                report.panels.push((format!("extrapolation_{deg}deg"), panel(&cap, &pair, pose, &gt[k], &opts, white)?));
            }
        }
    }
    report.metadata.insert("spc_frames".into(), spc.frames.to_string());
    report.metadata.insert("conventional_frames".into(), (spc.frames / group).to_string());
    report.metadata.insert("frame_count_ratio".into(), group.to_string());
    report.metadata.insert("capture_time_s".into(), spc.capture_time().to_string());
    Ok(report)
}

/// Trains on perturbed poses for every lambda and reports trajectory error
/// and holdout quality at the true poses.
pub fn run_pose_ablation(spec: &ExperimentSpec, work_dir: &Path) -> Result<ExperimentReport> {
    let noise = spec
        .pose_noise
        .ok_or_else(|| Error::Config("missing [pose_noise] table".into()))?;
    let cap = Capture::new(spec)?;
    let spc = spec.spc()?;
    let spc_cfg = spc.config(1.0)?;
    let holdout = holdout_poses(spec)?;
    let gt = cap.ground_truth(spec, &holdout)?;
    let mut opts = eval_options(spec);
    let white = white_point(&gt);
    opts.white = Some(white);
    let mapping = OutputMapping::Quanta(spc_cfg);
    let mut report = ExperimentReport {
        name: spec.name.clone(),
        x_label: "lambda".into(),
        ..Default::default()
    };
    for &seed in &spec.seeds {
        let path = work_dir.join(format!("ablation_seed{seed}.qrfbin"));
        simulate_spc_store(&path, &cap.flux, &spc_cfg, derive_seed(seed, 1))?;
        let store = BinaryFrameStore::open(&path)?;
        let perturbed = perturb_trajectory(&cap.spc_poses, &noise, derive_seed(seed, 3))?;
        let (t0, r0) = perturbed.rmse(&cap.spc_poses)?;
        for &lambda in &spec.lambdas {
            report.push(seed, "initial", lambda, "translation_rmse", t0);
            report.push(seed, "initial", lambda, "rotation_rmse_deg", r0.to_degrees());
            let cfg = TrainConfig {
                lambda,
                ..train_cfg(spec, seed)
            };
            let out = train(&store, &perturbed, &cap.intrinsics, &cfg)?;
            let (t, r) = out.poses.rmse(&cap.spc_poses)?;
            let m = evaluate_holdout(&out.field, &holdout, &cap.intrinsics, &gt, &mapping, &opts)?;
            report.push(seed, "trained", lambda, "translation_rmse", t);
            report.push(seed, "trained", lambda, "rotation_rmse_deg", r.to_degrees());
            report.push(seed, "trained", lambda, "psnr", m.psnr);
            report.push(seed, "trained", lambda, "ssim", m.ssim);
        }
        drop(store);
        std::fs::remove_file(&path).ok();
    }
    report.metadata.insert("noise_band_low_hz".into(), noise.band_hz.0.to_string());
    report.metadata.insert("noise_band_high_hz".into(), noise.band_hz.1.to_string());
    report.metadata.insert("translation_sigma".into(), noise.translation_sigma.to_string());
    report.metadata.insert("rotation_sigma".into(), noise.rotation_sigma.to_string());
    Ok(report)
}
