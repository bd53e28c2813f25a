use nalgebra::{Rotation3, UnitQuaternion};

use super::{PoseRow, PoseTrajectory};
use crate::camera::{Pose, Vec3};
use crate::{Error, Result};

/// Densifies sparse anchor poses to every frame from the first anchor index
/// to the last: translations are interpolated linearly, rotations by slerp on
/// the decoded matrices. Row `k` of the result is frame `anchors[0].0 + k`.
/// Anchor rows are copied verbatim.
pub fn interpolate_poses(anchors: &[(usize, PoseRow)], frame_rate: f64) -> Result<PoseTrajectory> {
    if anchors.len() < 2 {
        return Err(Error::invalid("interpolation needs at least two anchors"));
    }
    for w in anchors.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::invalid(format!(
                "anchor indices must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
    }
    let decoded: Vec<(Vec3, UnitQuaternion<f64>)> = anchors
        .iter()
        .map(|(_, row)| {
            let p = Pose::from_row(row)?;
            let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(p.rotation));
            Ok((p.translation, q))
        })
        .collect::<Result<_>>()?;

    let first = anchors[0].0;
    let last = anchors[anchors.len() - 1].0;
    let mut rows = Vec::with_capacity(last - first + 1);
    for seg in 0..anchors.len() - 1 {
        let (i0, row0) = anchors[seg];
        let i1 = anchors[seg + 1].0;
        let (t0, q0) = decoded[seg];
        let (t1, q1) = decoded[seg + 1];
        rows.push(row0);
        for f in i0 + 1..i1 {
            let s = (f - i0) as f64 / (i1 - i0) as f64;
            // Shortest-arc slerp; a 180 degree step has no unique geodesic.
            let q = q0
                .try_slerp(&q1, s, 1e-12)
                .ok_or_else(|| Error::Numerical(format!("antipodal anchors around frame {f}")))?;
            let pose = Pose {
                rotation: *q.to_rotation_matrix().matrix(),
                translation: t0 + (t1 - t0) * s,
            };
            rows.push(pose.to_row());
        }
    }
    rows.push(anchors[anchors.len() - 1].1);
    PoseTrajectory::new(rows, frame_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::rotation::rotation_angle_between;
    use nalgebra::{Matrix3, Vector3};
    use std::f64::consts::PI;

    fn rot_z(angle: f64) -> Matrix3<f64> {
        *Rotation3::from_axis_angle(&Vector3::z_axis(), angle).matrix()
    }

    #[test]
    fn identical_anchors_give_constant_trajectory() {
        let row = Pose::look_at(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), -Vec3::y()).unwrap().to_row();
        let traj = interpolate_poses(&[(0, row), (10, row)], 100.0).unwrap();
        assert_eq!(traj.len(), 11);
        for r in traj.rows() {
            for k in 0..9 {
                assert!((r[k] - row[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn midpoint_of_quarter_turn_is_eighth_turn() {
        let a = Pose { rotation: Matrix3::identity(), translation: Vec3::zeros() };
        let b = Pose { rotation: rot_z(PI / 2.0), translation: Vec3::new(2.0, 0.0, 0.0) };
        let traj = interpolate_poses(&[(0, a.to_row()), (2, b.to_row())], 1.0).unwrap();
        let mid = traj.pose(1);
        assert!(rotation_angle_between(&mid.rotation, &rot_z(PI / 4.0)) < 1e-9);
        assert!((mid.translation - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn anchors_are_reproduced_exactly() {
        let mut raw = Pose::identity().to_row();
        raw[3] = 2.0; // non-normalised encoding
        let b = Pose { rotation: rot_z(0.3), translation: Vec3::new(0.0, 1.0, 0.0) }.to_row();
        let traj = interpolate_poses(&[(3, raw), (7, b), (9, raw)], 1.0).unwrap();
        assert_eq!(traj.len(), 7);
        assert_eq!(*traj.row(0), raw);
        assert_eq!(*traj.row(4), b);
        assert_eq!(*traj.row(6), raw);
    }

    #[test]
    fn duplicate_or_decreasing_indices_are_errors() {
        let row = Pose::identity().to_row();
        assert!(interpolate_poses(&[(1, row), (1, row)], 1.0).is_err());
        assert!(interpolate_poses(&[(4, row), (2, row)], 1.0).is_err());
        assert!(interpolate_poses(&[(4, row)], 1.0).is_err());
    }
}
