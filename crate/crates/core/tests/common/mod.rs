//! Helpers shared by the integration tests.
#![allow(dead_code)]

use qrf_core::camera::{Aabb, CameraIntrinsics, Pose, PoseRay, Ray, Vec3};
use qrf_core::field::{forward_backward, render_ray_backward, render_value, VoxelField};
use qrf_core::pose::{PenaltyNormalization, PoseRow, Smoother};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn random_field(rng: &mut StdRng, res: [usize; 3]) -> VoxelField {
    let mut f = VoxelField::initial(res, Aabb::cube(1.0)).unwrap();
    for p in f.params_mut().chunks_mut(2) {
        p[0] = rng.random_range(-1.0..1.5);
        p[1] = rng.random_range(-2.0..2.0);
    }
    f
}

/// Ray from outside the unit cube through a random interior point.
pub fn random_ray(rng: &mut StdRng) -> Ray {
    let target = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let z = rng.random_range(-0.8..0.8f64);
    let dir = Vec3::new((1.0 - z * z).sqrt() * theta.cos(), (1.0 - z * z).sqrt() * theta.sin(), z);
    Ray::new(target - dir * 3.0, dir, 0.0, 10.0).unwrap()
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Worst relative error of the field-parameter gradient over `rays` random
/// rays, every parameter checked by central differences.
pub fn field_gradient_error(seed: u64, res: [usize; 3], rays: usize, n_samples: usize) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut field = random_field(&mut rng, res);
    let mut worst: f64 = 0.0;
    for _ in 0..rays {
        let ray = random_ray(&mut rng);
        let mut g = vec![0.0; field.params().len()];
        render_ray_backward(&field, &ray, n_samples, 1.0, &mut g).unwrap();
        let h = 1e-4;
        for i in 0..field.params().len() {
            let p0 = field.params()[i];
            field.params_mut()[i] = p0 + h;
            let up = render_value(&field, &ray, n_samples);
            field.params_mut()[i] = p0 - h;
            let down = render_value(&field, &ray, n_samples);
            field.params_mut()[i] = p0;
            worst = worst.max(rel_err((up - down) / (2.0 * h), g[i], 1e-6));
        }
    }
    worst
}

fn image_sum(field: &VoxelField, intr: &CameraIntrinsics, row: &PoseRow) -> f64 {
    let mut s = 0.0;
    for r in 0..intr.height {
        for c in 0..intr.width {
            let pr = PoseRay::new(intr, row, (r, c), 0.0, 10.0).unwrap();
            s += render_value(field, &pr.ray, 32);
        }
    }
    s
}

/// Worst relative error of the 9 pose-row gradients of an image sum for one
/// frame. The rotation columns are deliberately left un-normalised.
pub fn pose_gradient_error(seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let field = random_field(&mut rng, [6, 6, 6]);
    let intr = CameraIntrinsics::with_fov(8, 6, 50.0).unwrap();
    let pose = Pose::look_at(Vec3::new(0.3, -2.5, 0.4), Vec3::new(0.05, 0.0, -0.1), Vec3::new(0.0, 0.0, 1.0)).unwrap();
    let mut row = pose.to_row();
    for v in &mut row[3..6] {
        *v *= 1.3;
    }
    row[6] += 0.2;
    let mut scratch = vec![0.0; field.params().len()];
    let mut grad = [0.0; 9];
    for r in 0..intr.height {
        for c in 0..intr.width {
            let pr = PoseRay::new(&intr, &row, (r, c), 0.0, 10.0).unwrap();
            let (_, rg) = forward_backward(&field, &pr.ray, 32, |_| 1.0, &mut scratch, true);
            let g = pr.backward(&row, &rg.origin, &rg.direction);
            for j in 0..9 {
                grad[j] += g[j];
            }
        }
    }
    // Small step: the trilinear interpolant has kinks at cell boundaries.
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for j in 0..9 {
        let mut a = row;
        let mut b = row;
        a[j] += h;
        b[j] -= h;
        let fd = (image_sum(&field, &intr, &a) - image_sum(&field, &intr, &b)) / (2.0 * h);
        worst = worst.max(rel_err(fd, grad[j], 1e-4));
    }
    worst
}

/// A jittery random trajectory: a smooth orbit plus white noise.
pub fn noisy_rows(rng: &mut StdRng, n: usize, noise: f64) -> Vec<PoseRow> {
    (0..n)
        .map(|i| {
            let a = i as f64 / n as f64 * std::f64::consts::TAU;
            let mut r = Pose::look_at(Vec3::new(3.0 * a.cos(), 3.0 * a.sin(), 0.5), Vec3::zeros(), Vec3::z())
                .unwrap()
                .to_row();
            for v in &mut r {
                *v += noise * rng.random_range(-1.0..1.0);
            }
            r
        })
        .collect()
}

/// Worst relative error of the smoothing-penalty gradient. `components`
/// limits how many of the `9 n` entries are probed (all when `None`).
pub fn penalty_gradient_error(seed: u64, n: usize, smoother: &Smoother, components: Option<usize>) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rows = noisy_rows(&mut rng, n, 0.05);
    let lambda = 0.7;
    let pen = smoother.penalty(&rows, lambda, PenaltyNormalization::Sum).unwrap();
    let loss = |rows: &[PoseRow]| smoother.penalty(rows, lambda, PenaltyNormalization::Sum).unwrap().loss;
    let picks: Vec<usize> = match components {
        None => (0..9 * n).collect(),
        Some(k) => (0..k).map(|_| rng.random_range(0..9 * n)).collect(),
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for idx in picks {
        let (f, j) = (idx / 9, idx % 9);
        let v0 = rows[f][j];
        rows[f][j] = v0 + h;
        let up = loss(&rows);
        rows[f][j] = v0 - h;
        let down = loss(&rows);
        rows[f][j] = v0;
        worst = worst.max(rel_err((up - down) / (2.0 * h), pen.gradient[f][j], 1e-6));
    }
    worst
}
