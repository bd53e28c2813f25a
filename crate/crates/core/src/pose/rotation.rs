//! Continuous 6-D rotation encoding: the first two columns of a rotation
//! matrix, decoded by Gram-Schmidt orthonormalisation.

use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

const DEGENERATE: f64 = 1e-12;

pub fn encode_rotation(r: &Matrix3<f64>) -> [f64; 6] {
    [r[(0, 0)], r[(1, 0)], r[(2, 0)], r[(0, 1)], r[(1, 1)], r[(2, 1)]]
}

/// Gram-Schmidt decode. Errors when the first column is zero or the second
/// column is parallel to the first.
pub fn decode_rotation(a: &[f64; 6]) -> Result<Matrix3<f64>> {
    if Vector3::new(a[0], a[1], a[2]).norm() <= DEGENERATE {
        return Err(Error::invalid("rotation encoding has a zero first column"));
    }
    decode_rotation_unchecked(a)
        .ok_or_else(|| Error::invalid("rotation encoding columns are parallel"))
}

pub(crate) fn decode_rotation_unchecked(a: &[f64; 6]) -> Option<Matrix3<f64>> {
    let a1 = Vector3::new(a[0], a[1], a[2]);
    let a2 = Vector3::new(a[3], a[4], a[5]);
    let b1 = a1.try_normalize(DEGENERATE)?;
    let b2 = (a2 - b1 * b1.dot(&a2)).try_normalize(DEGENERATE)?;
    let b3 = b1.cross(&b2);
    Some(Matrix3::from_columns(&[b1, b2, b3]))
}

/// Pulls a gradient with respect to the decoded matrix back to the 6 raw
/// components. `r` must be `decode_rotation(a)`.
pub fn decode_rotation_backward(a: &[f64; 6], r: &Matrix3<f64>, grad_r: &Matrix3<f64>) -> [f64; 6] {
    let a1 = Vector3::new(a[0], a[1], a[2]);
    let a2 = Vector3::new(a[3], a[4], a[5]);
    let b1: Vector3<f64> = r.column(0).into();
    let b2: Vector3<f64> = r.column(1).into();
    let g3: Vector3<f64> = grad_r.column(2).into();
    // b3 = b1 x b2
    let mut g1: Vector3<f64> = grad_r.column(0).into();
    let mut g2: Vector3<f64> = grad_r.column(1).into();
    g1 += b2.cross(&g3);
    g2 += g3.cross(&b1);
    // b2 = u / |u|, u = a2 - (b1 . a2) b1
    let proj = b1.dot(&a2);
    let u = a2 - b1 * proj;
    let n2 = u.norm();
    let gu = (g2 - b2 * b2.dot(&g2)) / n2;
    let ga2 = gu - b1 * b1.dot(&gu);
    g1 -= gu * proj + a2 * b1.dot(&gu);
    // b1 = a1 / |a1|
    let n1 = a1.norm();
    let ga1 = (g1 - b1 * b1.dot(&g1)) / n1;
    [ga1.x, ga1.y, ga1.z, ga2.x, ga2.y, ga2.z]
}

/// Geodesic angle between two rotations, in radians.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    c.clamp(-1.0, 1.0).acos()
}
