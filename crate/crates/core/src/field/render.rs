//! Emission-absorption quadrature along rays and its reverse-mode gradient.
//!
//! A ray clipped to the field bounds at `[t0, t1]` is split into `n` equal
//! strata of width `δ` with one sample at each stratum midpoint. With
//! `αᵢ = 1 - exp(-σᵢ δ)` and `Tᵢ = Π_{j<i} (1 - αⱼ)` the rendered value is
//! `Σ Tᵢ αᵢ aᵢ`: the probability that a photon from the medium is detected.

use super::{sigmoid, softplus, Medium, VoxelField};
use super::Stencil;
use crate::camera::{accumulate_face_gradient, Ray, SegmentEnd, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RenderResult {
    pub value: f64,
    /// Transmittance left after the last sample.
    pub transmittance_out: f64,
    /// Per-sample weights `Tᵢ αᵢ`; empty when the ray misses the bounds.
    pub weights: Vec<f64>,
}

/// Gradient of the rendered value with respect to ray origin and direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayGradient {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl RayGradient {
    pub fn zero() -> Self {
        Self {
            origin: Vec3::zeros(),
            direction: Vec3::zeros(),
        }
    }
}

fn check(ray: &Ray, n_samples: usize) -> Result<()> {
    if n_samples < 2 {
        return Err(Error::invalid(format!("need at least 2 samples per ray, got {n_samples}")));
    }
    ray.validate()
}

pub fn render_ray<M: Medium + ?Sized>(medium: &M, ray: &Ray, n_samples: usize) -> Result<RenderResult> {
    check(ray, n_samples)?;
    let Some((t0, _, t1, _)) = medium.bounds().clip(ray) else {
        return Ok(RenderResult {
            value: 0.0,
            transmittance_out: 1.0,
            weights: Vec::new(),
        });
    };
    let delta = (t1 - t0) / n_samples as f64;
    let mut weights = Vec::with_capacity(n_samples);
    let mut transmittance = 1.0;
    let mut value = 0.0;
    for i in 0..n_samples {
        let t = t0 + (i as f64 + 0.5) * delta;
        let (sigma, albedo) = medium.sample(&ray.at(t));
        let alpha = -(-sigma * delta).exp_m1();
        let w = transmittance * alpha;
        value += w * albedo;
        weights.push(w);
        transmittance *= 1.0 - alpha;
    }
    Ok(RenderResult {
        value,
        transmittance_out: transmittance,
        weights,
    })
}

/// Value only, without allocating; `ray` is assumed valid.
pub fn render_value<M: Medium + ?Sized>(medium: &M, ray: &Ray, n_samples: usize) -> f64 {
    let Some((t0, _, t1, _)) = medium.bounds().clip(ray) else {
        return 0.0;
    };
    let delta = (t1 - t0) / n_samples as f64;
    let mut transmittance = 1.0;
    let mut value = 0.0;
    for i in 0..n_samples {
        let t = t0 + (i as f64 + 0.5) * delta;
        let (sigma, albedo) = medium.sample(&ray.at(t));
        let alpha = -(-sigma * delta).exp_m1();
        value += transmittance * alpha * albedo;
        transmittance *= 1.0 - alpha;
    }
    value
}

/// Backpropagates `upstream = ∂L/∂value` into `grad` (same layout as the
/// field parameters, accumulated) and returns the ray-space gradient.
pub fn render_ray_backward(
    field: &VoxelField,
    ray: &Ray,
    n_samples: usize,
    upstream: f64,
    grad: &mut [f64],
) -> Result<RayGradient> {
    check(ray, n_samples)?;
    if grad.len() != field.params().len() {
        return Err(Error::mismatch(field.params().len(), grad.len()));
    }
    Ok(forward_backward(field, ray, n_samples, |_| upstream, grad, true).1)
}

struct SampleRecord {
    stencil: Stencil,
    sigma: f64,
    albedo: f64,
    alpha: f64,
    // softplus'(zd)
    d_sigma: f64,
}

/// Renders `ray`, asks `loss_grad(value)` for `∂L/∂value`, and
/// backpropagates it. Ray gradients are computed only when `want_ray` is set.
/// `ray` is assumed valid and `grad` correctly sized.
pub fn forward_backward(
    field: &VoxelField,
    ray: &Ray,
    n_samples: usize,
    loss_grad: impl FnOnce(f64) -> f64,
    grad: &mut [f64],
    want_ray: bool,
) -> (f64, RayGradient) {
    let mut ray_grad = RayGradient::zero();
    let Some((t0, e0, t1, e1)) = field.bounds().clip(ray) else {
        loss_grad(0.0);
        return (0.0, ray_grad);
    };
    let n = n_samples as f64;
    let delta = (t1 - t0) / n;

    RECORDS.with_borrow_mut(|records| {
        records.clear();
        let mut transmittance = 1.0;
        let mut value = 0.0;
        for i in 0..n_samples {
            let t = t0 + (i as f64 + 0.5) * delta;
            let stencil = field.stencil(&ray.at(t));
            let (zd, za) = field.raw_at(&stencil);
            let sigma = softplus(zd);
            let albedo = sigmoid(za);
            let alpha = -(-sigma * delta).exp_m1();
            value += transmittance * alpha * albedo;
            transmittance *= 1.0 - alpha;
            records.push(SampleRecord { stencil, sigma, albedo, alpha, d_sigma: sigmoid(zd) });
        }

        let u = loss_grad(value);
        if u == 0.0 {
            return (value, ray_grad);
        }
        backward(field, ray, records, value, u, (t0, e0, t1, e1), grad, want_ray, &mut ray_grad);
        (value, ray_grad)
    })
}

thread_local! {
    static RECORDS: std::cell::RefCell<Vec<SampleRecord>> = const { std::cell::RefCell::new(Vec::new()) };
}

#[allow(clippy::too_many_arguments)]
fn backward(
    field: &VoxelField,
    ray: &Ray,
    records: &[SampleRecord],
    value: f64,
    u: f64,
    (t0, e0, t1, e1): (f64, SegmentEnd, f64, SegmentEnd),
    grad: &mut [f64],
    want_ray: bool,
    ray_grad: &mut RayGradient,
) {
    let n = records.len() as f64;
    let delta = (t1 - t0) / n;

    let params = field.params();
    // Walk front to back keeping Tᵢ and the prefix sum of wₖaₖ so that
    // Sᵢ₊₁ = value - prefix.
    let mut t_i = 1.0;
    let mut prefix = 0.0;
    let mut d_delta = 0.0;
    let mut d_t0 = 0.0;
    let mut d_t1 = 0.0;
    for (i, rec) in records.iter().enumerate() {
        let alpha = rec.alpha;
        let w = t_i * alpha;
        let t_next = t_i * (1.0 - alpha);
        prefix += w * rec.albedo;
        let g = t_next * rec.albedo - (value - prefix);
        d_delta += rec.sigma * g;

        let d_zd = u * delta * g * rec.d_sigma;
        let d_za = u * w * rec.albedo * (1.0 - rec.albedo);
        let frac = (i as f64 + 0.5) / n;
        let t = t0 + frac * (t1 - t0);
        let s = &rec.stencil;
        let mut spatial = [0.0f64; 3];
        for c in 0..8 {
            let v = s.idx[c];
            grad[2 * v] += d_zd * s.w[c];
            grad[2 * v + 1] += d_za * s.w[c];
            if want_ray {
                let k = d_zd * params[2 * v] + d_za * params[2 * v + 1];
                let dw = s.dw(c);
                for a in 0..3 {
                    spatial[a] += dw[a] * k;
                }
            }
        }
        if want_ray {
            let sp = Vec3::new(spatial[0], spatial[1], spatial[2]);
            ray_grad.origin += sp;
            ray_grad.direction += sp * t;
            let along = sp.dot(&ray.direction);
            d_t0 += along * (1.0 - frac);
            d_t1 += along * frac;
        }
        t_i = t_next;
    }
    if want_ray {
        d_t0 -= u * d_delta / n;
        d_t1 += u * d_delta / n;
        accumulate_face_gradient(e0, t0, d_t0, ray, &mut ray_grad.origin, &mut ray_grad.direction);
        accumulate_face_gradient(e1, t1, d_t1, ray, &mut ray_grad.origin, &mut ray_grad.direction);
    }
}
