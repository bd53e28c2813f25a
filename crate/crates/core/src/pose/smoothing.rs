//! Fourier lowpass smoothing of pose trajectories and the smoothness penalty
//! `lambda * sum_j |P_j - smooth(P)_j|^2`.
//!
//! Each of the 9 columns is filtered independently along the frame axis. The
//! filter is `S = crop . F^-1 H F . extend`, where `extend` is either the
//! identity (periodic) or an even reflection by `N/4` samples on each side.
//! `H` is real and symmetric in frequency, so `F^-1 H F` is a symmetric
//! circulant matrix and the adjoint of `S` is `extend^T . F^-1 H F . crop^T`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{PoseRow, PoseTrajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Taper {
    BrickWall,
    /// Cosine roll-off from unit gain at the cutoff to zero at
    /// `cutoff + width_hz`.
    RaisedCosine { width_hz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Even reflection by `N/4` frames before the transform, cropped after.
    Mirror,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyNormalization {
    /// Plain sum over frames.
    #[default]
    Sum,
    /// Sum divided by the number of frames.
    PerFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "LowpassSpecFields")]
pub struct LowpassSpec {
    pub cutoff_hz: f64,
    pub taper: Taper,
    pub boundary: Boundary,
}

/// Config form: omitted taper and boundary take the [`LowpassSpec::new`] defaults.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LowpassSpecFields {
    cutoff_hz: f64,
    taper: Option<Taper>,
    boundary: Option<Boundary>,
}

impl From<LowpassSpecFields> for LowpassSpec {
    fn from(f: LowpassSpecFields) -> Self {
        let d = LowpassSpec::new(f.cutoff_hz);
        Self {
            cutoff_hz: f.cutoff_hz,
            taper: f.taper.unwrap_or(d.taper),
            boundary: f.boundary.unwrap_or(d.boundary),
        }
    }
}

impl Default for LowpassSpec {
    fn default() -> Self {
        Self::new(500.0)
    }
}

impl LowpassSpec {
    /// Raised-cosine taper 10% of the cutoff wide, mirrored boundaries.
    pub fn new(cutoff_hz: f64) -> Self {
        Self {
            cutoff_hz,
            taper: Taper::RaisedCosine {
                width_hz: 0.1 * cutoff_hz,
            },
            boundary: Boundary::Mirror,
        }
    }

    /// Ideal filter with periodic boundaries; the form with exact spectral
    /// identities.
    pub fn brick_wall(cutoff_hz: f64) -> Self {
        Self {
            cutoff_hz,
            taper: Taper::BrickWall,
            boundary: Boundary::Periodic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_hz > 0.0) || self.cutoff_hz.is_nan() {
            return Err(Error::invalid(format!("cutoff must be positive, got {}", self.cutoff_hz)));
        }
        if let Taper::RaisedCosine { width_hz } = self.taper {
            if !(width_hz >= 0.0) {
                return Err(Error::invalid("taper width must be non-negative"));
            }
        }
        Ok(())
    }

    /// Gain at frequency `f` (Hz, non-negative).
    pub fn transfer(&self, f: f64) -> f64 {
        if f <= self.cutoff_hz {
            return 1.0;
        }
        match self.taper {
            Taper::BrickWall => 0.0,
            Taper::RaisedCosine { width_hz } => {
                let x = (f - self.cutoff_hz) / width_hz;
                if width_hz <= 0.0 || x >= 1.0 {
                    0.0
                } else {
                    0.5 * (1.0 + (std::f64::consts::PI * x).cos())
                }
            }
        }
    }
}

/// Precomputed smoothing operator for trajectories of a fixed length.
pub struct Smoother {
    len: usize,
    pad: usize,
    gains: Vec<f64>,
    identity: bool,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Smoother {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Smoother")
            .field("len", &self.len)
            .field("pad", &self.pad)
            .field("identity", &self.identity)
            .finish()
    }
}

/// Output of [`Smoother::penalty`].
#[derive(Debug, Clone)]
pub struct Penalty {
    /// `lambda * energy`.
    pub loss: f64,
    /// Unweighted residual energy `|(I - S) P|^2` (normalised as requested).
    pub energy: f64,
    /// Gradient of `loss` with respect to every pose component.
    pub gradient: Vec<PoseRow>,
}

impl Smoother {
    pub fn new(len: usize, frame_rate: f64, spec: &LowpassSpec) -> Result<Self> {
        spec.validate()?;
        if len < 2 {
            return Err(Error::invalid("smoothing needs at least two poses"));
        }
        if !(frame_rate > 0.0) {
            return Err(Error::invalid("frame rate must be positive"));
        }
        let pad = match spec.boundary {
            Boundary::Periodic => 0,
            Boundary::Mirror => len / 4,
        };
        let m = len + 2 * pad;
        let gains: Vec<f64> = (0..m)
            .map(|k| {
                let bin = k.min(m - k) as f64;
                spec.transfer(bin * frame_rate / m as f64)
            })
            .collect();
        let identity = gains.iter().all(|&g| g == 1.0);
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            pad,
            gains,
            identity,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn extended_len(&self) -> usize {
        self.len + 2 * self.pad
    }

    #[inline]
    fn source_index(&self, k: usize) -> usize {
        let n = self.len as isize;
        let mut i = k as isize - self.pad as isize;
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
        i as usize
    }

    /// Filters two real sequences at once as the real and imaginary parts of
    /// one complex sequence; valid because the gains are real and symmetric.
    fn filter_pair(&self, buf: &mut [Complex<f64>]) {
        if self.identity {
            return;
        }
        self.forward.process(buf);
        let scale = 1.0 / buf.len() as f64;
        for (c, g) in buf.iter_mut().zip(&self.gains) {
            *c *= g * scale;
        }
        self.inverse.process(buf);
    }

    /// Applies `S` to two columns.
    fn apply_pair(&self, a: &[f64], b: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let m = self.extended_len();
        let mut buf: Vec<Complex<f64>> = (0..m)
            .map(|k| {
                let s = self.source_index(k);
                Complex::new(a[s], b.map_or(0.0, |b| b[s]))
            })
            .collect();
        self.filter_pair(&mut buf);
        let out = &buf[self.pad..self.pad + self.len];
        (out.iter().map(|c| c.re).collect(), out.iter().map(|c| c.im).collect())
    }

    /// Applies `S^T` to two columns.
    fn adjoint_pair(&self, a: &[f64], b: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let m = self.extended_len();
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for i in 0..self.len {
            buf[self.pad + i] = Complex::new(a[i], b.map_or(0.0, |b| b[i]));
        }
        self.filter_pair(&mut buf);
        let mut ra = vec![0.0; self.len];
        let mut rb = vec![0.0; self.len];
        for (k, c) in buf.iter().enumerate() {
            let s = self.source_index(k);
            ra[s] += c.re;
            rb[s] += c.im;
        }
        (ra, rb)
    }

    fn columnwise(
        &self,
        cols: &[Vec<f64>],
        op: impl Fn(&Self, &[f64], Option<&[f64]>) -> (Vec<f64>, Vec<f64>),
    ) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(cols.len());
        for pair in cols.chunks(2) {
            let (a, b) = op(self, &pair[0], pair.get(1).map(|v| v.as_slice()));
            out.push(a);
            if pair.len() == 2 {
                out.push(b);
            }
        }
        out
    }

    /// `S` applied to one column.
    pub fn apply(&self, column: &[f64]) -> Vec<f64> {
        self.apply_pair(column, None).0
    }

    /// `S^T` applied to one column.
    pub fn apply_adjoint(&self, column: &[f64]) -> Vec<f64> {
        self.adjoint_pair(column, None).0
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len {
            return Err(Error::mismatch(self.len, n));
        }
        Ok(())
    }

    pub fn smooth_rows(&self, rows: &[PoseRow]) -> Result<Vec<PoseRow>> {
        self.check_len(rows.len())?;
        let cols = to_columns(rows);
        Ok(from_columns(&self.columnwise(&cols, Self::apply_pair)))
    }

    /// Residual energy of `rows` and its exact gradient
    /// `2 lambda (I - S)^T (I - S) P` (scaled by the normalisation).
    pub fn penalty(&self, rows: &[PoseRow], lambda: f64, normalization: PenaltyNormalization) -> Result<Penalty> {
        self.check_len(rows.len())?;
        let norm = match normalization {
            PenaltyNormalization::Sum => 1.0,
            PenaltyNormalization::PerFrame => 1.0 / self.len as f64,
        };
        if self.identity {
            return Ok(Penalty {
                loss: 0.0,
                energy: 0.0,
                gradient: vec![[0.0; 9]; self.len],
            });
        }
        let cols = to_columns(rows);
        let smooth = self.columnwise(&cols, Self::apply_pair);
        let residual: Vec<Vec<f64>> = cols
            .iter()
            .zip(&smooth)
            .map(|(c, s)| c.iter().zip(s).map(|(a, b)| a - b).collect())
            .collect();
        let energy = norm * residual.iter().flatten().map(|r| r * r).sum::<f64>();
        let back = self.columnwise(&residual, Self::adjoint_pair);
        let grad_cols: Vec<Vec<f64>> = residual
            .iter()
            .zip(&back)
            .map(|(r, st)| r.iter().zip(st).map(|(a, b)| 2.0 * lambda * norm * (a - b)).collect())
            .collect();
        Ok(Penalty {
            loss: lambda * energy,
            energy,
            gradient: from_columns(&grad_cols),
        })
    }
}

fn to_columns(rows: &[PoseRow]) -> Vec<Vec<f64>> {
    (0..9).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

fn from_columns(cols: &[Vec<f64>]) -> Vec<PoseRow> {
    let n = cols[0].len();
    (0..n)
        .map(|i| {
            let mut r = [0.0; 9];
            for j in 0..9 {
                r[j] = cols[j][i];
            }
            r
        })
        .collect()
}

/// Lowpassed copy of `trajectory`.
pub fn fourier_smooth(trajectory: &PoseTrajectory, spec: &LowpassSpec) -> Result<PoseTrajectory> {
    let smoother = Smoother::new(trajectory.len(), trajectory.frame_rate(), spec)?;
    PoseTrajectory::new(smoother.smooth_rows(trajectory.rows())?, trajectory.frame_rate())
}

/// Penalty `lambda * sum_j |P_j - smooth(P)_j|^2` and its gradient.
pub fn smoothing_penalty(trajectory: &PoseTrajectory, spec: &LowpassSpec, lambda: f64) -> Result<Penalty> {
    Smoother::new(trajectory.len(), trajectory.frame_rate(), spec)?.penalty(
        trajectory.rows(),
        lambda,
        PenaltyNormalization::Sum,
    )
}
