//! Desk-scale experiments: blur-noise tradeoff, low-light sweep, view
//! extrapolation and the pose-smoothing ablation.
//!
//! An [`ExperimentSpec`] is read from TOML, every random draw is keyed from
//! its seeds, and [`run_experiment`] returns an [`ExperimentReport`] that can
//! be written out as `metrics.csv`, SVG curves and PNG panels.

pub mod blur_noise;
mod experiments;
pub mod report;
pub mod scenes;
pub mod simulate;
pub mod trajectory;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use blur_noise::{edge_spread_width, run_blur_noise_sweep, tradeoff_curve, BlurNoiseSpec, TradeoffCurve};
pub use experiments::{run_extrapolation_sweep, run_lowlight_sweep, run_pose_ablation};
pub use report::{ExperimentReport, MetricRow};
pub use scenes::{build_scene, GroundTruth, SceneId};
pub use simulate::{simulate_conventional, simulate_spc_store, FluxSequence};
pub use trajectory::{extrapolation_arc, orbit_pose, TrajectorySpec};

use crate::camera::CameraIntrinsics;
use crate::photon_sim::{ConventionalConfig, RenderOptions, SpcConfig};
use crate::pose::NoiseSpec;
use crate::trainer::TrainConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BlurNoise,
    Lowlight,
    Extrapolation,
    PoseAblation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub width: usize,
    pub height: usize,
    pub fov_deg: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            fov_deg: 40.0,
        }
    }
}

impl SensorSpec {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::with_fov(self.width, self.height, self.fov_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpcCamera {
    pub frame_rate: f64,
    pub frames: usize,
    /// Photons per second for a rendered ground-truth value of 1.
    pub flux_scale: f64,
    #[serde(default)]
    pub dark_count_rate: f64,
}

impl SpcCamera {
    pub fn capture_time(&self) -> f64 {
        self.frames as f64 / self.frame_rate
    }

    pub fn config(&self, quantum_scale: f64) -> Result<SpcConfig> {
        let mut cfg = SpcConfig::at_rate(self.frame_rate)?;
        cfg.quantum_scale = quantum_scale;
        cfg.dark_count_rate = self.dark_count_rate;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_full_well() -> f64 {
    1000.0
}

fn default_read_noise() -> f64 {
    4.0
}

fn one() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    1.0 / 2.2
}

/// Conventional camera integrating over its whole frame period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConventionalCamera {
    pub frame_rate: f64,
    #[serde(default = "default_full_well")]
    pub full_well: f64,
    #[serde(default = "default_read_noise")]
    pub read_noise_sigma: f64,
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default = "default_gamma")]
    pub response_gamma: f64,
}

impl ConventionalCamera {
    pub fn config(&self, quantum_scale: f64) -> Result<ConventionalConfig> {
        let cfg = ConventionalConfig {
            exposure: 1.0 / self.frame_rate,
            full_well: self.full_well,
            read_noise_sigma: self.read_noise_sigma,
            gain: self.gain,
            response_gamma: self.response_gamma,
            black_level: 0.0,
            quantum_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSpec {
    pub n_samples: usize,
    /// Ground truth is rendered every this many frames and interpolated.
    pub keyframe_stride: usize,
    pub near: f64,
    pub far: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            n_samples: 64,
            keyframe_stride: 8,
            near: 0.0,
            far: 100.0,
        }
    }
}

impl RenderSpec {
    pub fn options(&self, flux_scale: f64) -> RenderOptions {
        RenderOptions {
            flux_scale,
            n_samples: self.n_samples,
            near: self.near,
            far: self.far,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_resolution() -> usize {
    16
}

fn default_stops() -> Vec<f64> {
    vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
}

fn default_displacements() -> Vec<f64> {
    vec![0.0, 3.0, 6.0, 9.0, 12.0]
}

fn default_holdout() -> usize {
    6
}

fn default_lambdas() -> Vec<f64> {
    vec![0.0, 0.1]
}

fn default_trajectory() -> TrajectorySpec {
    TrajectorySpec::Circular {
        radius: 3.0,
        elevation_deg: 20.0,
        sweep_deg: 360.0,
    }
}

fn default_scene() -> SceneId {
    SceneId::Blobs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub experiment: ExperimentKind,
    #[serde(default = "default_scene")]
    pub scene: SceneId,
    #[serde(default = "default_resolution")]
    pub scene_resolution: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default = "default_trajectory")]
    pub trajectory: TrajectorySpec,
    pub spc: Option<SpcCamera>,
    pub conventional: Option<ConventionalCamera>,
    #[serde(default)]
    pub render: RenderSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_stops")]
    pub stops: Vec<f64>,
    #[serde(default = "default_displacements")]
    pub displacements_deg: Vec<f64>,
    #[serde(default = "default_holdout")]
    pub holdout_views: usize,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    pub pose_noise: Option<NoiseSpec>,
    pub blur_noise: Option<BlurNoiseSpec>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn spc(&self) -> Result<SpcCamera> {
        self.spc.ok_or_else(|| Error::Config(format!("experiment `{}` needs an [spc] table", self.name)))
    }

    pub fn conventional(&self) -> Result<ConventionalCamera> {
        self.conventional
            .ok_or_else(|| Error::Config(format!("experiment `{}` needs a [conventional] table", self.name)))
    }

    /// SPC frames per conventional frame. Both cameras must cover the same
    /// capture time, so this has to be an exact integer dividing the SPC
    /// frame count.
    pub fn frame_group(&self) -> Result<usize> {
        let spc = self.spc()?;
        let conv = self.conventional()?;
        let ratio = spc.frame_rate / conv.frame_rate;
        let group = ratio.round() as usize;
        if group == 0 || (ratio - group as f64).abs() > 1e-9 * ratio || spc.frames % group != 0 {
            return Err(Error::Config(format!(
                "capture time mismatch: {} SPC frames at {} Hz cannot be matched by a {} Hz camera",
                spc.frames, spc.frame_rate, conv.frame_rate
            )));
        }
        Ok(group)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.train.validate()?;
        match self.experiment {
            ExperimentKind::BlurNoise => {
                self.spc()?;
                if self.blur_noise.is_none() {
                    return Err(Error::Config("blur_noise experiment needs a [blur_noise] table".into()));
                }
            }
            ExperimentKind::Lowlight | ExperimentKind::Extrapolation => {
                self.frame_group()?;
            }
            ExperimentKind::PoseAblation => {
                self.spc()?;
                if self.pose_noise.is_none() {
                    return Err(Error::Config("pose_ablation needs a [pose_noise] table".into()));
                }
            }
        }
        if self.experiment == ExperimentKind::Extrapolation && !matches!(self.trajectory, TrajectorySpec::Sinusoidal { .. }) {
            return Err(Error::Config("extrapolation needs a sinusoidal trajectory".into()));
        }
        Ok(())
    }
}

/// Runs the experiment; intermediate frame stores go to `work_dir`.
pub fn run_experiment(spec: &ExperimentSpec, work_dir: &Path) -> Result<ExperimentReport> {
    spec.validate()?;
    std::fs::create_dir_all(work_dir)?;
    match spec.experiment {
        ExperimentKind::BlurNoise => run_blur_noise_sweep(spec, work_dir),
        ExperimentKind::Lowlight => run_lowlight_sweep(spec, work_dir),
        ExperimentKind::Extrapolation => run_extrapolation_sweep(spec, work_dir),
        ExperimentKind::PoseAblation => run_pose_ablation(spec, work_dir),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capture_time_must_match() {
        let text = r#"
            name = "x"
            experiment = "lowlight"
            [spc]
            frame_rate = 10000.0
            frames = 4000
            flux_scale = 30000.0
            [conventional]
            frame_rate = 50.0
        "#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.frame_group().unwrap(), 200);
        let bad = text.replace("frame_rate = 50.0", "frame_rate = 30.0");
        assert!(ExperimentSpec::from_toml(&bad).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentSpec::from_toml("name = \"x\"\nexperiment = \"lowlight\"\nbogus = 3\n").is_err());
    }
}
