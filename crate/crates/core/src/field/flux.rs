//! Conversions between detection probability, flux and display values.

use crate::image::{FloatImage, FluxImage};
use crate::{Error, Result};

/// Default saturation margin for [`invert_flux`].
pub const SATURATION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxEstimate {
    pub flux: f64,
    /// The input was at or above `1 - eps` and was clamped.
    pub saturated: bool,
}

/// Probability that a pixel with flux `flux` detects at least one photon in `tau`.
pub fn bernoulli_probability(flux: f64, tau: f64) -> f64 {
    -(-flux * tau).exp_m1()
}

/// `φ̂ = -ln(1 - P̂) / τ`.
pub fn invert_flux(p_hat: f64, tau: f64) -> Result<FluxEstimate> {
    invert_flux_eps(p_hat, tau, SATURATION_EPS)
}

pub fn invert_flux_eps(p_hat: f64, tau: f64, eps: f64) -> Result<FluxEstimate> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    if !(p_hat >= 0.0) {
        return Err(Error::invalid(format!("detection probability must be >= 0, got {p_hat}")));
    }
    let saturated = p_hat >= 1.0 - eps;
    let p = if saturated { 1.0 - eps } else { p_hat };
    Ok(FluxEstimate {
        flux: -(-p).ln_1p() / tau,
        saturated,
    })
}

/// Applies [`invert_flux`] per pixel to a binary-frame mean. Returns the flux
/// image and the number of saturated pixels.
pub fn mle_flux_from_frames(mean: &FloatImage, tau: f64) -> Result<(FluxImage, usize)> {
    let mut saturated = 0;
    let mut values = Vec::with_capacity(mean.data().len());
    for &m in mean.data() {
        let est = invert_flux(m as f64, tau)?;
        saturated += est.saturated as usize;
        values.push(est.flux as f32);
    }
    Ok((FluxImage::new(mean.width(), mean.height(), values)?, saturated))
}

/// Linear intensity from a binary mean: `-ln(1 - m) / factor`.
pub fn binary_mean_to_linear(m: f64, factor: f64) -> f64 {
    -(-m.min(1.0 - SATURATION_EPS)).ln_1p() / factor
}

/// `clamp(linear / white, 0, 1)^(1/gamma)`. The flag reports whether any
/// negative input had to be clamped.
pub fn tonemap(linear: &FloatImage, white: f64, gamma: f64) -> (FloatImage, bool) {
    let mut clamped = false;
    let inv_gamma = 1.0 / gamma;
    let out = linear.map(|v| {
        if v < 0.0 {
            clamped = true;
        }
        ((v as f64 / white).clamp(0.0, 1.0)).powf(inv_gamma) as f32
    });
    (out, clamped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inversion_examples() {
        assert_eq!(invert_flux(0.0, 1e-4).unwrap().flux, 0.0);
        let e = invert_flux(1.0 - (-1.0f64).exp(), 1.0).unwrap();
        assert!((e.flux - 1.0).abs() < 1e-12 && !e.saturated);
        assert!(invert_flux(1.0, 1.0).unwrap().saturated);
        assert!(invert_flux(-0.1, 1.0).is_err());
        assert!(invert_flux(0.5, 0.0).is_err());
    }

    #[test]
    fn binary_half_is_ln2() {
        assert!((binary_mean_to_linear(0.5, 1.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tonemap_endpoints() {
        let img = FloatImage::new(3, 1, vec![0.0, 1.0, -0.5]).unwrap();
        for gamma in [1.0, 2.2, 2.4] {
            let (out, clamped) = tonemap(&img, 1.0, gamma);
            assert_eq!(out.data(), &[0.0, 1.0, 0.0]);
            assert!(clamped);
        }
    }

    #[test]
    fn all_ones_mean_saturates() {
        let (img, sat) = mle_flux_from_frames(&FloatImage::filled(2, 2, 1.0), 1e-4).unwrap();
        assert_eq!(sat, 4);
        assert!(img.values().iter().all(|v| v.is_finite()));
    }
}
