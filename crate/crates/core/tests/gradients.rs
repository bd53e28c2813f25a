//! Analytic gradients against central finite differences.

mod common;

use common::*;
use qrf_core::camera::{Aabb, Ray, Vec3};
use qrf_core::field::{forward_backward, render_ray_backward, render_value, VoxelField};
use qrf_core::pose::{Boundary, LowpassSpec, Smoother};
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn single_sample_density_gradient_matches_closed_form() {
    // One voxel, constant density: value = a (1 - exp(-σ d)), d = 2.
    let field = VoxelField::constant([1, 1, 1], Aabb::cube(1.0), 0.3, 0.4).unwrap();
    let ray = Ray::new(Vec3::new(-3.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), 0.0, 10.0).unwrap();
    let mut g = vec![0.0; 2];
    render_ray_backward(&field, &ray, 16, 1.0, &mut g).unwrap();
    let sigma = field.density(0);
    let a = field.albedo(0);
    let dsoft = 1.0 / (1.0 + (-0.3f64).exp());
    let expected_sigma = a * 2.0 * (-sigma * 2.0).exp() * dsoft;
    let expected_albedo = (1.0 - (-sigma * 2.0).exp()) * a * (1.0 - a);
    assert!(rel_err(g[0], expected_sigma, 1e-12) < 1e-10);
    assert!(rel_err(g[1], expected_albedo, 1e-12) < 1e-10);
}

#[test]
fn zero_upstream_gives_zero_gradient() {
    let mut rng = StdRng::seed_from_u64(1);
    let field = random_field(&mut rng, [4, 4, 4]);
    let mut g = vec![0.0; field.params().len()];
    render_ray_backward(&field, &random_ray(&mut rng), 32, 0.0, &mut g).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn field_parameter_gradients_match_finite_differences() {
    for (seed, res) in [(2, [3, 4, 5]), (5, [8, 8, 8])] {
        let worst = field_gradient_error(seed, res, 4, 24);
        assert!(worst < 1e-3, "resolution {res:?}: worst relative error {worst}");
    }
}

#[test]
fn ray_gradients_match_finite_differences() {
    let mut rng = StdRng::seed_from_u64(3);
    let field = random_field(&mut rng, [6, 6, 6]);
    let mut scratch = vec![0.0; field.params().len()];
    for _ in 0..20 {
        let ray = random_ray(&mut rng);
        let (_, rg) = forward_backward(&field, &ray, 32, |_| 1.0, &mut scratch, true);
        let h = 1e-6;
        for k in 0..6 {
            let mut a = ray;
            let mut b = ray;
            if k < 3 {
                a.origin[k] += h;
                b.origin[k] -= h;
            } else {
                a.direction[k - 3] += h;
                b.direction[k - 3] -= h;
            }
            let fd = (render_value(&field, &a, 32) - render_value(&field, &b, 32)) / (2.0 * h);
            let an = if k < 3 { rg.origin[k] } else { rg.direction[k - 3] };
            assert!(rel_err(fd, an, 1e-5) < 1e-3, "component {k}: fd {fd} vs analytic {an}");
        }
    }
}

#[test]
fn pose_gradients_match_finite_differences() {
    let worst = pose_gradient_error(4);
    assert!(worst < 1e-3, "worst relative error {worst}");
}

#[test]
fn penalty_gradients_match_finite_differences() {
    for boundary in [Boundary::Periodic, Boundary::Mirror] {
        let spec = LowpassSpec { boundary, ..LowpassSpec::new(60.0) };
        let smoother = Smoother::new(64, 500.0, &spec).unwrap();
        let worst = penalty_gradient_error(6, 64, &smoother, None);
        assert!(worst < 1e-3, "{boundary:?}: worst relative error {worst}");
    }
}
