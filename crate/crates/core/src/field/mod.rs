//! Dense voxel radiance field in detection-probability space.
//!
//! Each voxel stores two unconstrained parameters: a density pre-activation
//! (`density = softplus(raw)`) and an albedo pre-activation
//! (`albedo = sigmoid(raw)`). Pre-activations are trilinearly interpolated
//! between voxel centres and activated per sample, so density stays
//! non-negative and albedo stays in `[0, 1]` whatever the optimiser does.

pub mod flux;
pub mod render;
pub mod scene;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub use crate::camera::{Aabb, Ray};
pub use flux::{binary_mean_to_linear, bernoulli_probability, invert_flux, mle_flux_from_frames, tonemap, FluxEstimate};
pub use render::{forward_backward, render_ray, render_ray_backward, render_value, RayGradient, RenderResult};
pub use scene::{Emitter, FluxScene, Shape};

use crate::camera::Vec3;
use crate::{Error, Result};

pub const FIELD_MAGIC: &[u8; 8] = b"QRFFIELD";
pub const FIELD_VERSION: u32 = 1;

/// Anything the renderer can march through.
pub trait Medium: Sync {
    fn bounds(&self) -> Aabb;
    /// `(density, albedo)` at a world point inside the bounds.
    fn sample(&self, p: &Vec3) -> (f64, f64);
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn inverse_softplus(y: f64) -> f64 {
    let y = y.max(1e-12);
    if y > 30.0 {
        y
    } else {
        y + (-(-y).exp_m1()).ln()
    }
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

/// Trilinear stencil at one point: 8 corner voxels and their weights.
/// Corner `c` takes the upper neighbour on axis `a` when bit `a` of `c` is set.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub idx: [usize; 8],
    pub w: [f64; 8],
    /// Per-axis fractional offsets and their spatial derivatives.
    f: [f64; 3],
    df: [f64; 3],
}

impl Stencil {
    /// Spatial gradient of the weight of corner `c`.
    #[inline]
    pub fn dw(&self, c: usize) -> [f64; 3] {
        let mut wa = [0.0; 3];
        let mut da = [0.0; 3];
        for a in 0..3 {
            if (c >> a) & 1 == 1 {
                wa[a] = self.f[a];
                da[a] = self.df[a];
            } else {
                wa[a] = 1.0 - self.f[a];
                da[a] = -self.df[a];
            }
        }
        [da[0] * wa[1] * wa[2], wa[0] * da[1] * wa[2], wa[0] * wa[1] * da[2]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelField {
    resolution: [usize; 3],
    bounds: Aabb,
    cell: [f64; 3],
    inv_cell: [f64; 3],
    /// Interleaved `[density_raw, albedo_raw]` per voxel, x fastest.
    params: Vec<f64>,
}

impl VoxelField {
    pub fn constant(resolution: [usize; 3], bounds: Aabb, density_raw: f64, albedo_raw: f64) -> Result<Self> {
        if resolution.contains(&0) {
            return Err(Error::invalid(format!("resolution must be positive, got {resolution:?}")));
        }
        Aabb::new(bounds.min, bounds.max)?;
        let n = resolution.iter().product::<usize>();
        let mut params = Vec::with_capacity(2 * n);
        for _ in 0..n {
            params.push(density_raw);
            params.push(albedo_raw);
        }
        let cell = [0, 1, 2].map(|a| bounds.extent(a) / resolution[a] as f64);
        Ok(Self {
            resolution,
            bounds,
            cell,
            inv_cell: cell.map(|c| 1.0 / c),
            params,
        })
    }

    /// The initial field: near-empty (`softplus(-2)`) and mid-grey.
    pub fn initial(resolution: [usize; 3], bounds: Aabb) -> Result<Self> {
        Self::constant(resolution, bounds, -2.0, 0.0)
    }

    /// Field whose voxel at centre `p` has activated values `f(p)`.
    pub fn from_fn(resolution: [usize; 3], bounds: Aabb, f: impl Fn(&Vec3) -> (f64, f64)) -> Result<Self> {
        let mut field = Self::constant(resolution, bounds, 0.0, 0.0)?;
        for v in 0..field.voxel_count() {
            let (density, albedo) = f(&field.voxel_center(v));
            field.params[2 * v] = inverse_softplus(density);
            field.params[2 * v + 1] = logit(albedo);
        }
        Ok(field)
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn voxel_count(&self) -> usize {
        self.params.len() / 2
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn density(&self, voxel: usize) -> f64 {
        softplus(self.params[2 * voxel])
    }

    pub fn albedo(&self, voxel: usize) -> f64 {
        sigmoid(self.params[2 * voxel + 1])
    }

    pub fn voxel_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution[1] + j) * self.resolution[0] + i
    }

    pub fn voxel_center(&self, voxel: usize) -> Vec3 {
        let [nx, ny, _] = self.resolution;
        let ijk = [voxel % nx, (voxel / nx) % ny, voxel / (nx * ny)];
        Vec3::from_fn(|a, _| self.bounds.min[a] + (ijk[a] as f64 + 0.5) * self.cell[a])
    }

    #[inline]
    pub(crate) fn stencil(&self, p: &Vec3) -> Stencil {
        let mut base = [0usize; 3];
        let mut step = [0usize; 3];
        let mut f = [0.0f64; 3];
        let mut df = [0.0f64; 3];
        for a in 0..3 {
            let n = self.resolution[a];
            if n == 1 {
                continue;
            }
            let u = (p[a] - self.bounds.min[a]) * self.inv_cell[a] - 0.5;
            let hi = (n - 1) as f64;
            let uc = u.clamp(0.0, hi);
            let b = (uc as usize).min(n - 2);
            base[a] = b;
            step[a] = 1;
            f[a] = uc - b as f64;
            if u > 0.0 && u < hi {
                df[a] = self.inv_cell[a];
            }
        }
        let [nx, ny, _] = self.resolution;
        let (sx, sy, sz) = (step[0], step[1] * nx, step[2] * nx * ny);
        let i0 = (base[2] * ny + base[1]) * nx + base[0];
        let [fx, fy, fz] = f;
        let (gx, gy, gz) = (1.0 - fx, 1.0 - fy, 1.0 - fz);
        Stencil {
            idx: [
                i0,
                i0 + sx,
                i0 + sy,
                i0 + sx + sy,
                i0 + sz,
                i0 + sx + sz,
                i0 + sy + sz,
                i0 + sx + sy + sz,
            ],
            w: [
                gx * gy * gz,
                fx * gy * gz,
                gx * fy * gz,
                fx * fy * gz,
                gx * gy * fz,
                fx * gy * fz,
                gx * fy * fz,
                fx * fy * fz,
            ],
            f,
            df,
        }
    }

    /// Interpolated `(density_raw, albedo_raw)` at `p`.
    #[inline]
    pub(crate) fn raw_at(&self, s: &Stencil) -> (f64, f64) {
        let mut zd = 0.0;
        let mut za = 0.0;
        for c in 0..8 {
            zd += s.w[c] * self.params[2 * s.idx[c]];
            za += s.w[c] * self.params[2 * s.idx[c] + 1];
        }
        (zd, za)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path.as_ref())?);
        w.write_all(FIELD_MAGIC)?;
        w.write_all(&FIELD_VERSION.to_le_bytes())?;
        for n in self.resolution {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        for v in self.bounds.min.iter().chain(&self.bounds.max) {
            w.write_all(&v.to_le_bytes())?;
        }
        for k in 0..2 {
            for v in 0..self.voxel_count() {
                w.write_all(&(self.params[2 * v + k] as f32).to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        const HEADER: usize = 8 + 4 + 12 + 48;
        if bytes.len() < HEADER || &bytes[..8] != FIELD_MAGIC {
            return Err(Error::format(path, "not a QRFFIELD checkpoint"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if u32_at(8) != FIELD_VERSION {
            return Err(Error::format(path, format!("unsupported version {}", u32_at(8))));
        }
        let resolution = [u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize];
        let bounds = Aabb::new(
            [f64_at(24), f64_at(32), f64_at(40)],
            [f64_at(48), f64_at(56), f64_at(64)],
        )
        .map_err(|e| Error::format(path, e.to_string()))?;
        let mut field = Self::constant(resolution, bounds, 0.0, 0.0)
            .map_err(|e| Error::format(path, e.to_string()))?;
        let n = field.voxel_count();
        if bytes.len() != HEADER + 8 * n {
            return Err(Error::format(path, format!("expected {} bytes", HEADER + 8 * n)));
        }
        for k in 0..2 {
            for v in 0..n {
                let o = HEADER + 4 * (k * n + v);
                field.params[2 * v + k] = f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
            }
        }
        Ok(field)
    }
}

impl Medium for VoxelField {
    fn bounds(&self) -> Aabb {
        self.bounds
    }

    #[inline]
    fn sample(&self, p: &Vec3) -> (f64, f64) {
        let (zd, za) = self.raw_at(&self.stencil(p));
        (softplus(zd), sigmoid(za))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activations_invert() {
        for y in [1e-6, 0.1, 1.0, 5.0, 40.0] {
            assert!((softplus(inverse_softplus(y)) - y).abs() < 1e-9 * y.max(1.0));
        }
        for p in [0.01, 0.5, 0.99] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn trilinear_reproduces_voxel_centres_and_linear_ramps() {
        let b = Aabb::cube(1.0);
        let field = VoxelField::from_fn([4, 3, 5], b, |p| (1.0 + p.x + 2.0 * p.y - p.z + 3.0, 0.5)).unwrap();
        for v in 0..field.voxel_count() {
            let c = field.voxel_center(v);
            let (d, _) = field.sample(&c);
            assert!((d - field.density(v)).abs() < 1e-9);
        }
        let s = field.stencil(&Vec3::new(0.1, -0.2, 0.3));
        assert!((s.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_roundtrip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let field = VoxelField::from_fn([3, 2, 2], Aabb::cube(0.5), |p| (2.0 + p.x, 0.3 + 0.2 * p.y)).unwrap();
        field.save(dir.path().join("f.qrffield")).unwrap();
        let back = VoxelField::load(dir.path().join("f.qrffield")).unwrap();
        assert_eq!(back.resolution(), field.resolution());
        for (a, b) in back.params().iter().zip(field.params()) {
            assert_eq!(*a, (*b as f32) as f64);
        }
    }

    #[test]
    fn zero_resolution_is_rejected() {
        assert!(VoxelField::initial([0, 4, 4], Aabb::cube(1.0)).is_err());
    }
}
