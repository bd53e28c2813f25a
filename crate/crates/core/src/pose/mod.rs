//! Dense per-frame camera trajectories.
//!
//! A trajectory is an `N x 9` array: translation `[x, y, z]` followed by the
//! 6-D rotation encoding (first and second rotation-matrix columns).

pub mod interp;
pub mod perturb;
pub mod rotation;
pub mod smoothing;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub use interp::interpolate_poses;
pub use perturb::{band_limited_noise, perturb_trajectory, NoiseSpec};
pub use rotation::{decode_rotation, encode_rotation};
pub use smoothing::{
    fourier_smooth, smoothing_penalty, Boundary, LowpassSpec, Penalty, PenaltyNormalization, Smoother,
    Taper,
};

use crate::camera::Pose;
use crate::{Error, Result};

pub type PoseRow = [f64; 9];
/// `(frame_index, row)` pairs, not necessarily dense.
pub type IndexedRows = Vec<(usize, PoseRow)>;

pub const POSE_MAGIC: &[u8; 8] = b"QRFPOSE1";
pub const POSE_VERSION: u32 = 1;
const CSV_HEADER: [&str; 10] = ["frame_index", "x", "y", "z", "r1", "r2", "r3", "r4", "r5", "r6"];

#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrajectory {
    rows: Vec<PoseRow>,
    frame_rate: f64,
}

impl PoseTrajectory {
    /// Every row must decode to a proper rotation.
    pub fn new(rows: Vec<PoseRow>, frame_rate: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("trajectory needs at least one pose"));
        }
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::invalid(format!("frame rate must be positive, got {frame_rate}")));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("pose {i} has non-finite components")));
            }
            decode_rotation(&row[3..9].try_into().unwrap())
                .map_err(|e| Error::invalid(format!("pose {i}: {e}")))?;
        }
        Ok(Self { rows, frame_rate })
    }

    pub fn from_poses(poses: &[Pose], frame_rate: f64) -> Result<Self> {
        Self::new(poses.iter().map(Pose::to_row).collect(), frame_rate)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn rows(&self) -> &[PoseRow] {
        &self.rows
    }

    /// Raw mutable access for optimisers; callers own the rotation validity.
    pub fn rows_mut(&mut self) -> &mut [PoseRow] {
        &mut self.rows
    }

    pub fn row(&self, i: usize) -> &PoseRow {
        &self.rows[i]
    }

    pub fn pose(&self, i: usize) -> Pose {
        Pose::from_row(&self.rows[i]).expect("trajectory rows are validated")
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (r, v) in self.rows.iter_mut().zip(values) {
            r[j] = *v;
        }
    }

    /// Root-mean-square translation error and geodesic rotation error (rad).
    pub fn rmse(&self, reference: &PoseTrajectory) -> Result<(f64, f64)> {
        if self.len() != reference.len() {
            return Err(Error::mismatch(reference.len(), self.len()));
        }
        let mut t2 = 0.0;
        let mut r2 = 0.0;
        for i in 0..self.len() {
            let a = self.pose(i);
            let b = reference.pose(i);
            t2 += (a.translation - b.translation).norm_squared();
            r2 += rotation::rotation_angle_between(&a.rotation, &b.rotation).powi(2);
        }
        let n = self.len() as f64;
        Ok(((t2 / n).sqrt(), (r2 / n).sqrt()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = BufWriter::new(File::create(path.as_ref())?);
        writeln!(file, "# frame_rate_hz={}", self.frame_rate)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(CSV_HEADER)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dense CSV trajectory; frame indices must be `0..N`.
    /// `frame_rate` overrides (or supplies) the rate from the comment line.
    pub fn read_csv(path: impl AsRef<Path>, frame_rate: Option<f64>) -> Result<Self> {
        let path = path.as_ref();
        let (rate, rows) = read_indexed_csv(path)?;
        for (expected, (idx, _)) in rows.iter().enumerate() {
            if *idx != expected {
                return Err(Error::format(
                    path,
                    format!("dense trajectory expects frame index {expected}, found {idx}"),
                ));
            }
        }
        let rate = frame_rate
            .or(rate)
            .ok_or_else(|| Error::format(path, "no frame rate in file; supply one"))?;
        Self::new(rows.into_iter().map(|(_, r)| r).collect(), rate)
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        w.write_all(POSE_MAGIC)?;
        w.write_all(&POSE_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows.len() as u64).to_le_bytes())?;
        w.write_all(&self.frame_rate.to_le_bytes())?;
        for row in &self.rows {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() < 28 || &bytes[..8] != POSE_MAGIC {
            return Err(Error::format(path, "not a QRFPOSE1 file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != POSE_VERSION {
            return Err(Error::format(path, format!("unsupported version {version}")));
        }
        let n = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let rate = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let payload = &bytes[28..];
        if payload.len() != n * 72 {
            return Err(Error::format(path, format!("expected {} payload bytes", n * 72)));
        }
        let rows = payload
            .chunks_exact(72)
            .map(|c| {
                let mut r = [0.0; 9];
                for (k, v) in r.iter_mut().enumerate() {
                    *v = f64::from_le_bytes(c[8 * k..8 * k + 8].try_into().unwrap());
                }
                r
            })
            .collect();
        Self::new(rows, rate)
    }

    /// Reads either format, chosen by the file's leading bytes.
    pub fn read_any(path: impl AsRef<Path>, frame_rate: Option<f64>) -> Result<Self> {
        let path = path.as_ref();
        let mut magic = [0u8; 8];
        let is_binary = File::open(path)?.read_exact(&mut magic).is_ok() && &magic == POSE_MAGIC;
        if is_binary {
            Self::read_binary(path)
        } else {
            Self::read_csv(path, frame_rate)
        }
    }
}

/// Reads `(frame_index, row)` pairs, e.g. sparse interpolation anchors.
pub fn read_indexed_csv(path: impl AsRef<Path>) -> Result<(Option<f64>, IndexedRows)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let rate = text.lines().find_map(|l| {
        l.trim()
            .strip_prefix('#')
            .and_then(|c| c.trim().strip_prefix("frame_rate_hz="))
            .and_then(|v| v.trim().parse::<f64>().ok())
    });
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != 10 {
            return Err(Error::format(path, format!("expected 10 columns, got {}", rec.len())));
        }
        let idx: usize = rec[0]
            .parse()
            .map_err(|_| Error::format(path, format!("bad frame index {:?}", &rec[0])))?;
        let mut row = [0.0; 9];
        for k in 0..9 {
            row[k] = rec[k + 1]
                .parse()
                .map_err(|_| Error::format(path, format!("bad number {:?}", &rec[k + 1])))?;
        }
        rows.push((idx, row));
    }
    Ok((rate, rows))
}

pub fn write_indexed_csv(path: impl AsRef<Path>, frame_rate: f64, rows: &[(usize, PoseRow)]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path.as_ref())?);
    writeln!(file, "# frame_rate_hz={frame_rate}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER)?;
    for (i, row) in rows {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
