//! `poses smooth | interp | perturb`.

use std::path::Path;

use qrf_core::pose::{
    fourier_smooth, interpolate_poses, perturb_trajectory, read_indexed_csv, Boundary, LowpassSpec, NoiseSpec,
    PoseTrajectory, Taper,
};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::{BoundaryArg, PosesCommand, TaperArg};

/// `.qrfpose` selects the binary format; anything else is CSV.
pub fn write_trajectory(traj: &PoseTrajectory, path: &Path) -> CliResult<()> {
    if path.extension().is_some_and(|e| e == "qrfpose") {
        traj.write_binary(path)?;
    } else {
        traj.write_csv(path)?;
    }
    Ok(())
}

pub fn read_trajectory(path: &Path, frame_rate: Option<f64>) -> CliResult<PoseTrajectory> {
    if !path.exists() {
        return Err(CliError::io(format!("{}: no such file", path.display())));
    }
    Ok(PoseTrajectory::read_any(path, frame_rate)?)
}

pub fn run(cmd: &PosesCommand, threads: usize) -> CliResult<()> {
    let (name, out) = match cmd {
        PosesCommand::Smooth(a) => ("poses smooth", &a.io.out),
        PosesCommand::Interp(a) => ("poses interp", &a.out),
        PosesCommand::Perturb(a) => ("poses perturb", &a.io.out),
    };
    let mut manifest = RunManifest::new(name, threads);
    let result = match cmd {
        PosesCommand::Smooth(a) => {
            manifest.input(&a.io.input)?;
            let traj = read_trajectory(&a.io.input, a.io.frame_rate)?;
            let mut spec = LowpassSpec::new(a.cutoff_hz);
            spec.taper = match a.taper {
                TaperArg::BrickWall => Taper::BrickWall,
                TaperArg::RaisedCosine => match a.taper_width_hz {
                    Some(w) => Taper::RaisedCosine { width_hz: w },
                    None => spec.taper,
                },
            };
            spec.boundary = match a.boundary {
                BoundaryArg::Mirror => Boundary::Mirror,
                BoundaryArg::Periodic => Boundary::Periodic,
            };
            fourier_smooth(&traj, &spec)?
        }
        PosesCommand::Interp(a) => {
            if !a.anchors.exists() {
                return Err(CliError::io(format!("{}: no such file", a.anchors.display())));
            }
            manifest.input(&a.anchors)?;
            let (rate, anchors) = read_indexed_csv(&a.anchors)?;
            let rate = a
                .frame_rate
                .or(rate)
                .ok_or_else(|| CliError::usage("anchors carry no frame rate; pass --frame-rate"))?;
            interpolate_poses(&anchors, rate)?
        }
        PosesCommand::Perturb(a) => {
            manifest.input(&a.io.input)?;
            manifest.seeds.push(a.seed);
            let traj = read_trajectory(&a.io.input, a.io.frame_rate)?;
            let noise = NoiseSpec {
                band_hz: (a.band_low_hz, a.band_high_hz.unwrap_or(traj.frame_rate() / 2.0)),
                translation_sigma: a.translation_sigma,
                rotation_sigma: a.rotation_sigma,
            };
            perturb_trajectory(&traj, &noise, a.seed)?
        }
    };
    write_trajectory(&result, out)?;
    manifest.output(out);
    manifest.write_sidecar(out)?;
    Ok(())
}
