//! `train` and `render`.

use std::fs::File;
use std::io::{BufWriter, Write};

use qrf_core::camera::{CameraIntrinsics, Pose};
use qrf_core::field::{render_value, tonemap, VoxelField};
use qrf_core::frame_store::BinaryFrameStore;
use qrf_core::image::FloatImage;
use qrf_core::photon_sim::SpcConfig;
use qrf_core::trainer::{train_with, OutputMapping, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{decode, load_table};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::poses::read_trajectory;
use crate::{RenderArgs, TrainArgs};

fn default_fov() -> f64 {
    40.0
}

fn default_checkpoint_every() -> usize {
    500
}

fn default_validation() -> Vec<usize> {
    vec![0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    /// Horizontal field of view of the sensor, degrees.
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
    /// Write a checkpoint and validation renders every this many iterations.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    /// Frames whose current pose is rendered at every checkpoint.
    #[serde(default = "default_validation")]
    pub validation_frames: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
}

/// Rendered field values (detection probabilities for quanta fields).
fn render_values(field: &VoxelField, pose: &Pose, intr: &CameraIntrinsics, n: usize, near: f64, far: f64) -> FloatImage {
    let (w, h) = (intr.width, intr.height);
    let mut data = vec![0.0f32; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
        for (col, v) in out.iter_mut().enumerate() {
            *v = render_value(field, &pose.ray(intr, row, col, near, far), n) as f32;
        }
    });
    FloatImage::new(w, h, data).expect("dimensions are positive")
}

pub fn train(args: &TrainArgs, threads: usize) -> CliResult<()> {
    let mut table = load_table(args.config.as_deref(), &args.overrides)?;
    if let Some(seed) = args.seed {
        crate::config::apply_override(&mut table, &["train".into(), "seed".into()], toml::Value::Integer(seed as i64))?;
    }
    let mut run: TrainRunConfig = decode(&table)?;
    if run.checkpoint_every == 0 {
        return Err(CliError::config("checkpoint_every must be positive"));
    }
    std::fs::create_dir_all(&args.out)?;
    if run.train.diagnostic_dir.is_none() {
        run.train.diagnostic_dir = Some(args.out.clone());
    }
    run.train.validate()?;

    let mut manifest = RunManifest::new("train", threads).with_config(&table);
    manifest.seeds.push(run.train.seed);
    if let Some(c) = &args.config {
        manifest.input(c)?;
    }
    manifest.input(&args.frames)?;
    manifest.input(&args.poses)?;

    let store = BinaryFrameStore::open(&args.frames)?;
    let poses = read_trajectory(&args.poses, Some(store.header().frame_rate))?;
    let intr = CameraIntrinsics::with_fov(store.width(), store.height(), run.fov_deg)?;
    if let Some(&bad) = run.validation_frames.iter().find(|&&f| f >= poses.len()) {
        return Err(CliError::config(format!("validation frame {bad} is past the last pose")));
    }
    let init = match &args.init {
        Some(p) => {
            manifest.input(p)?;
            Some(VoxelField::load(p)?)
        }
        None => None,
    };

    let ckpt_dir = args.out.join("checkpoints");
    let val_dir = args.out.join("validation");
    std::fs::create_dir_all(&ckpt_dir)?;
    std::fs::create_dir_all(&val_dir)?;
    let loss_path = args.out.join("loss.csv");
    let mut loss = BufWriter::new(File::create(&loss_path)?);
    writeln!(loss, "iteration,photometric,regularizer,total")?;
    let cfg = &run.train;
    let mut written = Vec::new();
    let mut hook = |s: &qrf_core::trainer::TrainState| -> qrf_core::Result<()> {
        let it = s.iteration + 1;
        if s.iteration.is_multiple_of(cfg.log_every) || it == cfg.iterations {
            let r = s.report;
            writeln!(loss, "{},{:e},{:e},{:e}", r.iteration, r.photometric, r.regularizer, r.total)?;
        }
        if it.is_multiple_of(run.checkpoint_every) || it == cfg.iterations {
            let p = ckpt_dir.join(format!("step_{it:07}.qrffield"));
            s.field.save(&p)?;
            written.push(p);
            for &f in &run.validation_frames {
                let img = render_values(s.field, &s.poses.pose(f), &intr, cfg.n_samples, cfg.near, cfg.far);
                let p = val_dir.join(format!("step_{it:07}_frame_{f:05}.png"));
                img.write_png(&p)?;
                written.push(p);
            }
        }
        Ok(())
    };
    let out = train_with(&store, &poses, &intr, cfg, init, &mut hook)?;
    loss.flush()?;

    let field_path = args.out.join("field.qrffield");
    out.field.save(&field_path)?;
    let poses_path = args.out.join("poses.csv");
    out.poses.write_csv(&poses_path)?;
    for p in written {
        manifest.output(p);
    }
    manifest.output(&loss_path);
    manifest.output(&field_path);
    manifest.output(&poses_path);
    if let Some(last) = out.history.last() {
        println!(
            "{} iterations: photometric {:.6e}, regularizer {:.6e}",
            last.iteration + 1,
            last.photometric,
            last.regularizer
        );
    }
    manifest.write_dir(&args.out)?;
    Ok(())
}

pub fn render(args: &RenderArgs, threads: usize) -> CliResult<()> {
    if args.stride == 0 || args.n_samples < 2 {
        return Err(CliError::usage("--stride must be positive and --n-samples at least 2"));
    }
    let mut manifest = RunManifest::new("render", threads);
    manifest.input(&args.checkpoint)?;
    manifest.input(&args.poses)?;
    let field = VoxelField::load(&args.checkpoint)?;
    let poses = read_trajectory(&args.poses, None).or_else(|_| read_trajectory(&args.poses, Some(1.0)))?;
    let intr = CameraIntrinsics::with_fov(args.width, args.height, args.fov_deg)?;
    let mapping = match args.tau {
        Some(tau) => Some(OutputMapping::Quanta(SpcConfig::new(tau, 1.0 / tau)?)),
        None => None,
    };
    std::fs::create_dir_all(&args.out)?;

    let mut views = Vec::new();
    for k in (0..poses.len()).step_by(args.stride) {
        let mut img = render_values(&field, &poses.pose(k), &intr, args.n_samples, args.near, args.far);
        if let Some(m) = &mapping {
            img = img.map(|v| m.to_flux(v as f64) as f32);
        }
        let p = args.out.join(format!("view_{k:05}.qrfflux"));
        img.write_raster(&p)?;
        manifest.output(&p);
        views.push((k, img));
    }
    let white = views.iter().map(|(_, v)| v.max_value() as f64).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for (k, img) in &views {
        let p = args.out.join(format!("view_{k:05}.png"));
        tonemap(img, white, args.gamma).0.write_png(&p)?;
        manifest.output(p);
    }
    println!("rendered {} views to {}", views.len(), args.out.display());
    manifest.write_dir(&args.out)?;
    Ok(())
}
