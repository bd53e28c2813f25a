//! `simulate`, `pack`, `inspect`, `expose`.

use std::path::{Path, PathBuf};

use qrf_core::bench::{
    build_scene, simulate_conventional, simulate_spc_store, ConventionalCamera, FluxSequence, RenderSpec, SceneId,
    SensorSpec, SpcCamera, TrajectorySpec,
};
use qrf_core::field::{mle_flux_from_frames, FluxScene, Medium};
use qrf_core::frame_store::{BinaryFrame, BinaryFrameStore, DefectMask, StoreHeader, StoreMeta, StoreWriter};
use qrf_core::photon_sim::apply_defects;
use qrf_core::rng::derive_seed;
use serde::{Deserialize, Serialize};

use crate::config::{decode, load_table};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::{ExposeArgs, InspectArgs, PackArgs, SimulateArgs};

fn default_scene() -> SceneId {
    SceneId::Blobs
}

fn default_resolution() -> usize {
    16
}

fn one() -> f64 {
    1.0
}

fn default_trajectory() -> TrajectorySpec {
    TrajectorySpec::Circular {
        radius: 3.0,
        elevation_deg: 20.0,
        sweep_deg: 360.0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scene")]
    pub scene: SceneId,
    #[serde(default = "default_resolution")]
    pub scene_resolution: usize,
    /// Explicit emitters; replaces `scene` when present.
    pub custom_scene: Option<FluxScene>,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default = "default_trajectory")]
    pub trajectory: TrajectorySpec,
    pub spc: SpcCamera,
    /// Light-level multiplier shared by both cameras.
    #[serde(default = "one")]
    pub quantum_scale: f64,
    #[serde(default)]
    pub render: RenderSpec,
    /// Also simulate a conventional camera over the same capture.
    pub conventional: Option<ConventionalCamera>,
    /// `row,col,dead|hot` CSV of defective pixels.
    pub defects: Option<PathBuf>,
}

fn conventional_group(spc: &SpcCamera, conv: &ConventionalCamera) -> CliResult<usize> {
    let ratio = spc.frame_rate / conv.frame_rate;
    let group = ratio.round() as usize;
    if group == 0 || (ratio - group as f64).abs() > 1e-9 * ratio {
        return Err(CliError::config(format!(
            "SPC rate {} Hz is not an integer multiple of the conventional rate {} Hz",
            spc.frame_rate, conv.frame_rate
        )));
    }
    Ok(group)
}

pub fn simulate(args: &SimulateArgs, threads: usize) -> CliResult<()> {
    let mut table = load_table(Some(&args.config), &args.overrides)?;
    if let Some(seed) = args.seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    let cfg: SimulateConfig = decode(&table)?;
    let mut manifest = RunManifest::new("simulate", threads).with_config(&table);
    manifest.input(&args.config)?;
    manifest.seeds.push(cfg.seed);
    std::fs::create_dir_all(&args.out)?;

    let intrinsics = cfg.sensor.intrinsics()?;
    let scene: Box<dyn Medium> = match &cfg.custom_scene {
        Some(s) => {
            s.validate()?;
            Box::new(s.clone())
        }
        None => Box::new(build_scene(cfg.scene, cfg.scene_resolution)?),
    };
    let poses = cfg.trajectory.sample(cfg.spc.frames, cfg.spc.frame_rate, 0.0)?;
    let flux = FluxSequence::render(
        scene.as_ref(),
        &poses,
        &intrinsics,
        &cfg.render.options(cfg.spc.flux_scale),
        cfg.render.keyframe_stride,
    )?;

    let spc_cfg = cfg.spc.config(cfg.quantum_scale)?;
    let store_path = args.out.join("frames.qrfbin");
    simulate_spc_store(&store_path, &flux, &spc_cfg, derive_seed(cfg.seed, 1))?;
    if let Some(defects) = &cfg.defects {
        manifest.input(defects)?;
        let mask = DefectMask::read_csv(defects, intrinsics.width, intrinsics.height)?;
        apply_mask(&store_path, &mask)?;
    }
    manifest.output(&store_path);
    let poses_path = args.out.join("poses.csv");
    poses.write_csv(&poses_path)?;
    manifest.output(&poses_path);

    if let Some(conv) = &cfg.conventional {
        let group = conventional_group(&cfg.spc, conv)?;
        let conv_cfg = conv.config(cfg.quantum_scale)?;
        let frames = simulate_conventional(&flux, group, &conv_cfg, derive_seed(cfg.seed, 2))?;
        let dir = args.out.join("conventional");
        std::fs::create_dir_all(&dir)?;
        for (j, f) in frames.iter().enumerate() {
            let p = dir.join(format!("frame_{j:05}.qrfflux"));
            f.write_raster(&p)?;
            manifest.output(p);
        }
        // Each conventional frame is posed at the centre of its exposure.
        let offset = (group as f64 - 1.0) / (2.0 * group as f64);
        let conv_poses = cfg.trajectory.sample(frames.len(), conv.frame_rate, offset)?;
        let p = args.out.join("conventional_poses.csv");
        conv_poses.write_csv(&p)?;
        manifest.output(p);
    }
    let header = *BinaryFrameStore::open(&store_path)?.header();
    println!(
        "wrote {} frames of {}x{} to {} ({:.3} s capture)",
        header.frame_count,
        header.width,
        header.height,
        store_path.display(),
        header.duration_s()
    );
    manifest.write_dir(&args.out)?;
    Ok(())
}

/// Rewrites a store with dead pixels forced to 0 and hot pixels to 1.
fn apply_mask(path: &Path, mask: &DefectMask) -> CliResult<()> {
    let tmp = path.with_extension("qrfbin.tmp");
    {
        let store = BinaryFrameStore::open(path)?;
        let h = store.header();
        let meta = StoreMeta { frame_rate: h.frame_rate, tau: h.tau };
        let mut w = StoreWriter::create(&tmp, store.width(), store.height(), meta)?;
        for frame in store.frames() {
            let mut frame = frame?;
            apply_defects(&mut frame, mask)?;
            w.push(&frame)?;
        }
        w.finish()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn png_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
                .collect();
            entries.sort();
            files.extend(entries);
        } else if p.exists() {
            files.push(p.clone());
        } else {
            return Err(CliError::io(format!("{}: no such file or directory", p.display())));
        }
    }
    if files.is_empty() {
        return Err(CliError::usage("no PNG frames found in the inputs"));
    }
    Ok(files)
}

pub fn pack(args: &PackArgs, threads: usize) -> CliResult<()> {
    let files = png_inputs(&args.inputs)?;
    let tau = args.tau.unwrap_or(1.0 / args.frame_rate);
    let mut manifest = RunManifest::new("pack", threads);
    let first = BinaryFrame::read_png(&files[0])?;
    let mut writer = StoreWriter::create(
        &args.out,
        first.width(),
        first.height(),
        StoreMeta { frame_rate: args.frame_rate, tau },
    )?;
    for (i, f) in files.iter().enumerate() {
        let frame = if i == 0 { first.clone() } else { BinaryFrame::read_png(f)? };
        writer.push(&frame).map_err(|e| CliError::from(e).with_context(f))?;
        manifest.input(f)?;
    }
    let header = writer.finish()?;
    manifest.output(&args.out);
    println!("packed {} frames into {} ({} payload bytes)", header.frame_count, args.out.display(), header.payload_bytes());
    manifest.write_sidecar(&args.out)?;
    Ok(())
}

/// Unpacked-equivalent bandwidth: one bit per pixel per frame, in Gbit/s
/// with 1 Gbit = 2^30 bits.
pub fn bandwidth_gbps(header: &StoreHeader) -> f64 {
    header.width as f64 * header.height as f64 * header.frame_rate / (1u64 << 30) as f64
}

#[derive(Debug, Serialize)]
struct InspectReport {
    path: String,
    version: u32,
    width: usize,
    height: usize,
    frame_count: usize,
    frame_rate_hz: f64,
    tau_s: f64,
    duration_s: f64,
    frame_bytes: usize,
    payload_bytes: u64,
    file_bytes: u64,
    bandwidth_gbps: f64,
}

pub fn inspect(args: &InspectArgs) -> CliResult<()> {
    let store = BinaryFrameStore::open(&args.store)?;
    let h = store.header();
    let report = InspectReport {
        path: args.store.display().to_string(),
        version: h.version,
        width: h.width,
        height: h.height,
        frame_count: h.frame_count,
        frame_rate_hz: h.frame_rate,
        tau_s: h.tau,
        duration_s: h.duration_s(),
        frame_bytes: h.frame_bytes(),
        payload_bytes: h.payload_bytes(),
        file_bytes: std::fs::metadata(&args.store)?.len(),
        bandwidth_gbps: bandwidth_gbps(h),
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    } else {
        println!("store:         {}", report.path);
        println!("version:       {}", report.version);
        println!("dimensions:    {} x {}", report.width, report.height);
        println!("frames:        {}", report.frame_count);
        println!("frame rate:    {} Hz", report.frame_rate_hz);
        println!("exposure:      {} s", report.tau_s);
        println!("duration:      {} s", report.duration_s);
        println!("frame bytes:   {}", report.frame_bytes);
        println!("payload bytes: {}", report.payload_bytes);
        println!("file bytes:    {}", report.file_bytes);
        println!("bandwidth:     {:.1} Gbps (unpacked equivalent)", report.bandwidth_gbps);
    }
    Ok(())
}

pub fn expose(args: &ExposeArgs, threads: usize) -> CliResult<()> {
    let store = BinaryFrameStore::open(&args.store)?;
    let mean = store.virtual_exposure(args.start, args.n)?;
    let mut manifest = RunManifest::new("expose", threads);
    manifest.input(&args.store)?;
    if args.flux {
        let (flux, saturated) = mle_flux_from_frames(&mean, store.header().tau)?;
        flux.write_raster(&args.out)?;
        if saturated > 0 {
            eprintln!("{saturated} pixels saturated; their flux is a lower bound");
        }
    } else {
        mean.write_raster(&args.out)?;
    }
    manifest.output(&args.out);
    if let Some(png) = &args.png {
        mean.write_png(png)?;
        manifest.output(png);
    }
    manifest.write_sidecar(&args.out)?;
    Ok(())
}

impl CliError {
    fn with_context(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}
