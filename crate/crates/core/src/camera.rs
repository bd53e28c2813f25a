//! Pinhole cameras, rays and axis-aligned boxes.
//!
//! Camera frame follows the usual vision convention: +x right, +y down, +z
//! forward. A pose maps camera coordinates to world coordinates.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::pose::rotation::{decode_rotation_unchecked, decode_rotation_backward};
use crate::pose::PoseRow;
use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels.
    pub focal: f64,
    /// Principal point `(cx, cy)` in pixels, measured from the top-left corner
    /// of the image (pixel `(r, c)` covers `[c, c+1] x [r, r+1]`).
    pub principal_point: (f64, f64),
}

impl CameraIntrinsics {
    pub fn new(width: usize, height: usize, focal: f64) -> Result<Self> {
        let c = Self {
            width,
            height,
            focal,
            principal_point: (width as f64 / 2.0, height as f64 / 2.0),
        };
        c.validate()?;
        Ok(c)
    }

    /// Intrinsics with the given horizontal field of view in degrees.
    pub fn with_fov(width: usize, height: usize, fov_deg: f64) -> Result<Self> {
        let focal = 0.5 * width as f64 / (0.5 * fov_deg.to_radians()).tan();
        Self::new(width, height, focal)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera dimensions must be at least 1x1"));
        }
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(Error::invalid(format!("focal must be positive, got {}", self.focal)));
        }
        let (cx, cy) = self.principal_point;
        if !(0.0..=self.width as f64).contains(&cx) || !(0.0..=self.height as f64).contains(&cy) {
            return Err(Error::invalid(format!(
                "principal point ({cx}, {cy}) outside {}x{} image",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Unnormalised camera-frame direction through the centre of a pixel.
    #[inline]
    pub fn camera_direction(&self, row: usize, col: usize) -> Vec3 {
        let (cx, cy) = self.principal_point;
        Vec3::new(
            (col as f64 + 0.5 - cx) / self.focal,
            (row as f64 + 0.5 - cy) / self.focal,
            1.0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub direction: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t_near: f64, t_far: f64) -> Result<Self> {
        let ray = Self {
            origin,
            direction,
            t_near,
            t_far,
        };
        ray.validate()?;
        Ok(ray)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_near >= 0.0 && self.t_near < self.t_far) {
            return Err(Error::invalid(format!(
                "degenerate ray interval [{}, {}]",
                self.t_near, self.t_far
            )));
        }
        if ((self.direction.norm()) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("ray direction must be unit length"));
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Which face bounds a clipped ray segment, used to differentiate the
/// segment end points with respect to the ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentEnd {
    /// The ray's own `t_near` / `t_far`; independent of origin and direction.
    Fixed,
    /// Box plane `axis` at coordinate `plane`.
    Face { axis: usize, plane: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        if (0..3).any(|i| !(min[i] < max[i])) {
            return Err(Error::invalid(format!("empty box {min:?}..{max:?}")));
        }
        Ok(Self { min, max })
    }

    pub fn cube(half: f64) -> Self {
        Self {
            min: [-half; 3],
            max: [half; 3],
        }
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Clips `ray` to the box. Returns `(t0, end0, t1, end1)` or `None` when
    /// the clipped segment is empty.
    pub fn clip(&self, ray: &Ray) -> Option<(f64, SegmentEnd, f64, SegmentEnd)> {
        let mut t0 = ray.t_near;
        let mut e0 = SegmentEnd::Fixed;
        let mut t1 = ray.t_far;
        let mut e1 = SegmentEnd::Fixed;
        for axis in 0..3 {
            let o = ray.origin[axis];
            let d = ray.direction[axis];
            if d.abs() < 1e-300 {
                if o < self.min[axis] || o > self.max[axis] {
                    return None;
                }
                continue;
            }
            let (mut pa, mut pb) = (self.min[axis], self.max[axis]);
            if d < 0.0 {
                std::mem::swap(&mut pa, &mut pb);
            }
            let ta = (pa - o) / d;
            let tb = (pb - o) / d;
            if ta > t0 {
                t0 = ta;
                e0 = SegmentEnd::Face { axis, plane: pa };
            }
            if tb < t1 {
                t1 = tb;
                e1 = SegmentEnd::Face { axis, plane: pb };
            }
        }
        (t0 < t1).then_some((t0, e0, t1, e1))
    }
}

/// Gradient of `t = (plane - o[axis]) / d[axis]` with respect to origin and
/// direction, scaled by `upstream`, accumulated into `go`, `gd`.
#[inline]
pub(crate) fn accumulate_face_gradient(
    end: SegmentEnd,
    t: f64,
    upstream: f64,
    ray: &Ray,
    go: &mut Vec3,
    gd: &mut Vec3,
) {
    if let SegmentEnd::Face { axis, .. } = end {
        let d = ray.direction[axis];
        go[axis] -= upstream / d;
        gd[axis] -= upstream * t / d;
    }
}

/// Camera-to-world rigid transform decoded from a 9-D pose row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Camera at `eye` looking at `target`, with `up` roughly opposite the
    /// image `y` axis.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::invalid("look_at: eye equals target"))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::invalid("look_at: up parallel to view direction"))?;
        let down = forward.cross(&right);
        Ok(Self {
            rotation: Matrix3::from_columns(&[right, down, forward]),
            translation: eye,
        })
    }

    pub fn from_row(row: &PoseRow) -> Result<Self> {
        let rotation = crate::pose::rotation::decode_rotation(&row[3..9].try_into().unwrap())?;
        Ok(Self {
            rotation,
            translation: Vec3::new(row[0], row[1], row[2]),
        })
    }

    pub fn to_row(&self) -> PoseRow {
        let r6 = crate::pose::rotation::encode_rotation(&self.rotation);
        let t = self.translation;
        [t.x, t.y, t.z, r6[0], r6[1], r6[2], r6[3], r6[4], r6[5]]
    }

    pub fn ray(&self, intrinsics: &CameraIntrinsics, row: usize, col: usize, near: f64, far: f64) -> Ray {
        let dw = self.rotation * intrinsics.camera_direction(row, col);
        Ray {
            origin: self.translation,
            direction: dw.normalize(),
            t_near: near,
            t_far: far,
        }
    }
}

/// A pixel ray whose construction from a 9-D pose row can be differentiated.
#[derive(Debug, Clone, Copy)]
pub struct PoseRay {
    pub ray: Ray,
    rotation: Matrix3<f64>,
    cam_dir: Vec3,
    world_dir_norm: f64,
}

impl PoseRay {
    /// Builds the ray for a pixel from a raw pose row. The 6-D rotation part
    /// must have a non-degenerate first column.
    pub fn new(
        intrinsics: &CameraIntrinsics,
        row: &PoseRow,
        pixel: (usize, usize),
        near: f64,
        far: f64,
    ) -> Result<Self> {
        let rotation = decode_rotation_unchecked(&row[3..9].try_into().unwrap())
            .ok_or_else(|| Error::Numerical("degenerate pose rotation".into()))?;
        let cam_dir = intrinsics.camera_direction(pixel.0, pixel.1);
        let dw = rotation * cam_dir;
        let n = dw.norm();
        Ok(Self {
            ray: Ray {
                origin: Vec3::new(row[0], row[1], row[2]),
                direction: dw / n,
                t_near: near,
                t_far: far,
            },
            rotation,
            cam_dir,
            world_dir_norm: n,
        })
    }

    /// Chains ray-space gradients back to the 9 pose components. The
    /// direction normalisation Jacobian `(I - d d^T) / |R c|` is included.
    pub fn backward(&self, row: &PoseRow, grad_origin: &Vec3, grad_direction: &Vec3) -> PoseRow {
        let d = self.ray.direction;
        let g_dw = (grad_direction - d * d.dot(grad_direction)) / self.world_dir_norm;
        let mut g_rot = Matrix3::zeros();
        for j in 0..3 {
            g_rot.set_column(j, &(g_dw * self.cam_dir[j]));
        }
        let g6 = decode_rotation_backward(&row[3..9].try_into().unwrap(), &self.rotation, &g_rot);
        [
            grad_origin.x,
            grad_origin.y,
            grad_origin.z,
            g6[0],
            g6[1],
            g6[2],
            g6[3],
            g6[4],
            g6[5],
        ]
    }
}
