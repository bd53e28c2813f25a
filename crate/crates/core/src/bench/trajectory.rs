//! Camera trajectory generators. Every camera looks at the origin with world
//! `+z` as up.

use serde::{Deserialize, Serialize};

use crate::camera::{Pose, Vec3};
use crate::pose::PoseTrajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectorySpec {
    /// Constant-elevation circle swept over `sweep_deg` of azimuth.
    Circular { radius: f64, elevation_deg: f64, sweep_deg: f64 },
    /// Full circle with elevation `amplitude_deg * sin(peaks * azimuth)`.
    Sinusoidal { radius: f64, amplitude_deg: f64, peaks: u32 },
    /// Fixed camera.
    Static { radius: f64, elevation_deg: f64, azimuth_deg: f64 },
}

/// Camera on a sphere of `radius` at the given azimuth and elevation (radians).
pub fn orbit_pose(radius: f64, azimuth: f64, elevation: f64) -> Result<Pose> {
    let eye = Vec3::new(
        radius * elevation.cos() * azimuth.cos(),
        radius * elevation.cos() * azimuth.sin(),
        radius * elevation.sin(),
    );
    Pose::look_at(eye, Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0))
}

impl TrajectorySpec {
    pub fn radius(&self) -> f64 {
        match *self {
            TrajectorySpec::Circular { radius, .. }
            | TrajectorySpec::Sinusoidal { radius, .. }
            | TrajectorySpec::Static { radius, .. } => radius,
        }
    }

    /// `(azimuth, elevation)` in radians at normalised time `s` in `[0, 1)`.
    pub fn angles(&self, s: f64) -> (f64, f64) {
        use std::f64::consts::TAU;
        match *self {
            TrajectorySpec::Circular { elevation_deg, sweep_deg, .. } => {
                (s * sweep_deg.to_radians(), elevation_deg.to_radians())
            }
            TrajectorySpec::Sinusoidal { amplitude_deg, peaks, .. } => {
                let az = s * TAU;
                (az, amplitude_deg.to_radians() * (peaks as f64 * az).sin())
            }
            TrajectorySpec::Static { elevation_deg, azimuth_deg, .. } => {
                (azimuth_deg.to_radians(), elevation_deg.to_radians())
            }
        }
    }

    pub fn pose_at(&self, s: f64) -> Result<Pose> {
        let (az, el) = self.angles(s);
        orbit_pose(self.radius(), az, el)
    }

    /// `n` poses sampled at normalised times `(k + offset) / n`.
    pub fn sample(&self, n: usize, frame_rate: f64, offset: f64) -> Result<PoseTrajectory> {
        if n == 0 {
            return Err(Error::invalid("trajectory needs at least one frame"));
        }
        let poses = (0..n)
            .map(|k| self.pose_at((k as f64 + offset) / n as f64))
            .collect::<Result<Vec<_>>>()?;
        PoseTrajectory::from_poses(&poses, frame_rate)
    }
}

/// Test arc for extrapolation: starts at the first elevation peak of a
/// sinusoidal orbit and moves in azimuth at the peak elevation. Returns
/// `(displacement_deg, pose)` pairs.
pub fn extrapolation_arc(spec: &TrajectorySpec, displacements_deg: &[f64]) -> Result<Vec<(f64, Pose)>> {
    let TrajectorySpec::Sinusoidal { radius, amplitude_deg, peaks } = *spec else {
        return Err(Error::Config("extrapolation needs a sinusoidal trajectory".into()));
    };
    let peak_az = std::f64::consts::FRAC_PI_2 / peaks as f64;
    displacements_deg
        .iter()
        .map(|&d| Ok((d, orbit_pose(radius, peak_az + d.to_radians(), amplitude_deg.to_radians())?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_looks_at_origin() {
        let pose = orbit_pose(3.0, 0.7, 0.2).unwrap();
        let forward = pose.rotation.column(2).into_owned();
        let to_origin = (-pose.translation).normalize();
        assert!((forward - to_origin).norm() < 1e-12);
        assert!((pose.translation.norm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_has_requested_peaks() {
        let spec = TrajectorySpec::Sinusoidal {
            radius: 3.0,
            amplitude_deg: 10.0,
            peaks: 15,
        };
        let n = 15 * 40;
        let el: Vec<f64> = (0..n).map(|k| spec.angles(k as f64 / n as f64).1).collect();
        let maxima = (0..n).filter(|&k| el[k] > el[(k + n - 1) % n] && el[k] >= el[(k + 1) % n]).count();
        assert_eq!(maxima, 15);
    }

    #[test]
    fn arc_starts_on_the_trajectory() {
        let spec = TrajectorySpec::Sinusoidal {
            radius: 3.0,
            amplitude_deg: 10.0,
            peaks: 15,
        };
        let arc = extrapolation_arc(&spec, &[0.0, 12.0]).unwrap();
        let on = spec.pose_at(0.25 / 15.0).unwrap();
        assert!((arc[0].1.translation - on.translation).norm() < 1e-12);
        // Halfway between peaks the trajectory is at a trough.
        let trough = spec.pose_at(0.75 / 15.0).unwrap();
        assert!((arc[1].1.translation.z - -trough.translation.z).abs() < 1e-9);
    }
}
