//! Noise-versus-blur tradeoff of virtual exposures on a translating edge.
//!
//! For a window of `n` frames the virtual exposure splits into its
//! expectation (the mean detection probability over the window) and a
//! zero-mean fluctuation. Noise is the RMS fluctuation; blur is the 10-90%
//! edge-spread width of the expectation's column profile.

use serde::{Deserialize, Serialize};

use super::report::ExperimentReport;
use super::ExperimentSpec;
use crate::frame_store::{BinaryFrameStore, StoreMeta, StoreWriter};
use crate::image::FluxImage;
use crate::photon_sim::{sample_binary_frame, SpcConfig};
use crate::rng::derive_seed;
use crate::{Error, Result};

fn default_windows() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlurNoiseSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Edge speed in pixels per frame.
    pub velocity: f64,
    pub n_values: Vec<usize>,
    /// Flux (photons/s) right and left of the edge.
    pub flux_bright: f64,
    pub flux_dark: f64,
    /// Windows averaged per `n`.
    #[serde(default = "default_windows")]
    pub windows: usize,
}

/// `(n, noise, blur)` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCurve {
    pub points: Vec<(usize, f64, f64)>,
}

struct Edge<'a> {
    spec: &'a BlurNoiseSpec,
    velocity: f64,
    start: f64,
}

impl Edge<'_> {
    fn position(&self, frame: usize) -> f64 {
        self.start + self.velocity * frame as f64
    }

    /// Flux of column `c` at `frame`: pixel area right of the edge is bright.
    fn column_flux(&self, c: usize, frame: usize) -> f64 {
        let bright = (c as f64 + 1.0 - self.position(frame)).clamp(0.0, 1.0);
        self.spec.flux_dark + (self.spec.flux_bright - self.spec.flux_dark) * bright
    }

    fn flux(&self, frame: usize) -> Result<FluxImage> {
        let row: Vec<f32> = (0..self.spec.width).map(|c| self.column_flux(c, frame) as f32).collect();
        FluxImage::new(self.spec.width, self.spec.height, row.repeat(self.spec.height))
    }
}

/// 10-90% rise distance of a monotone-ish profile, with crossings linearly
/// interpolated between samples. Levels are relative to the profile's own
/// minimum and maximum.
pub fn edge_spread_width(profile: &[f64]) -> f64 {
    let lo = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return 0.0;
    }
    let cross = |level: f64| -> f64 {
        for i in 1..profile.len() {
            let (a, b) = (profile[i - 1], profile[i]);
            if a < level && b >= level {
                return (i - 1) as f64 + (level - a) / (b - a);
            }
        }
        profile.len() as f64
    };
    cross(lo + 0.9 * (hi - lo)) - cross(lo + 0.1 * (hi - lo))
}

fn sweep_one(spec: &BlurNoiseSpec, spc: &SpcConfig, velocity: f64, seed: u64, path: &std::path::Path) -> Result<TradeoffCurve> {
    let travel = velocity.abs() * spec.frames as f64;
    if travel + 4.0 > spec.width as f64 {
        return Err(Error::Config(format!(
            "edge travels {travel} px over {} frames; sensor is only {} px wide",
            spec.frames, spec.width
        )));
    }
    let edge = Edge {
        spec,
        velocity,
        start: (spec.width as f64 - travel) / 2.0 + 0.3,
    };
    let mut writer = StoreWriter::create(
        path,
        spec.width,
        spec.height,
        StoreMeta {
            frame_rate: spc.frame_rate,
            tau: spc.tau,
        },
    )?;
    for k in 0..spec.frames {
        writer.push(&sample_binary_frame(&edge.flux(k)?, spc, derive_seed(seed, k as u64))?)?;
    }
    writer.finish()?;
    let store = BinaryFrameStore::open(path)?;

    let mut points = Vec::new();
    for &n in &spec.n_values {
        if n == 0 || n > spec.frames {
            return Err(Error::Config(format!("window length {n} outside 1..={}", spec.frames)));
        }
        let windows = (spec.frames / n).min(spec.windows.max(1));
        let mut sq = 0.0;
        let mut count = 0usize;
        let mut blur = 0.0;
        for j in 0..windows {
            let start = j * n;
            let expected: Vec<f64> = (0..spec.width)
                .map(|c| (start..start + n).map(|k| spc.detection_probability(edge.column_flux(c, k))).sum::<f64>() / n as f64)
                .collect();
            blur += edge_spread_width(&expected);
            let ve = store.virtual_exposure(start, n)?;
            for r in 0..spec.height {
                for (c, e) in expected.iter().enumerate() {
                    sq += (ve.get(r, c) as f64 - e).powi(2);
                    count += 1;
                }
            }
        }
        points.push((n, (sq / count as f64).sqrt(), blur / windows as f64));
    }
    drop(store);
    std::fs::remove_file(path).ok();
    Ok(TradeoffCurve { points })
}

/// Static and moving edges for every `n`; metrics `noise` and `blur_px`.
pub fn run_blur_noise_sweep(spec: &ExperimentSpec, work_dir: &std::path::Path) -> Result<ExperimentReport> {
    let bn = spec
        .blur_noise
        .as_ref()
        .ok_or_else(|| Error::Config("missing [blur_noise] table".into()))?;
    let spc = spec.spc()?.config(1.0)?;
    let mut report = ExperimentReport {
        name: spec.name.clone(),
        x_label: "virtual exposure length n (frames)".into(),
        ..Default::default()
    };
    for &seed in &spec.seeds {
        for (method, v) in [("static", 0.0), ("moving", bn.velocity)] {
            let path = work_dir.join(format!("edge_{method}_{seed}.qrfbin"));
            let curve = sweep_one(bn, &spc, v, seed, &path)?;
            for (n, noise, blur) in curve.points {
                report.push(seed, method, n as f64, "noise", noise);
                report.push(seed, method, n as f64, "blur_px", blur);
            }
        }
    }
    report.metadata.insert("velocity_px_per_frame".into(), bn.velocity.to_string());
    report.metadata.insert("tau_s".into(), spc.tau.to_string());
    Ok(report)
}

/// Single tradeoff curve for one edge speed.
pub fn tradeoff_curve(spec: &BlurNoiseSpec, spc: &SpcConfig, velocity: f64, seed: u64, work_dir: &std::path::Path) -> Result<TradeoffCurve> {
    std::fs::create_dir_all(work_dir)?;
    sweep_one(spec, spc, velocity, seed, &work_dir.join(format!("edge_{seed}.qrfbin")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_spread_of_a_ramp() {
        let profile: Vec<f64> = (0..20).map(|i| ((i as f64 - 5.0) / 10.0).clamp(0.0, 1.0)).collect();
        assert!((edge_spread_width(&profile) - 8.0).abs() < 1e-9);
        assert_eq!(edge_spread_width(&[0.5; 4]), 0.0);
    }
}
