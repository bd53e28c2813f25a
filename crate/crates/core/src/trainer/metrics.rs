//! Image quality metrics on `[0, 1]` images.

use crate::image::FloatImage;
use crate::{Error, Result};

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

fn check(a: &FloatImage, b: &FloatImage) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::mismatch(
            format!("{}x{}", a.width(), a.height()),
            format!("{}x{}", b.width(), b.height()),
        ));
    }
    Ok(())
}

pub fn mse(a: &FloatImage, b: &FloatImage) -> Result<f64> {
    check(a, b)?;
    let n = a.data().len() as f64;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>() / n)
}

/// Peak signal-to-noise ratio with peak 1, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &FloatImage, b: &FloatImage) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * m.log10()).min(PSNR_CAP_DB))
}

/// Mean SSIM with an 11x11 Gaussian window (σ = 1.5), K1 = 0.01, K2 = 0.03 and
/// dynamic range 1. Windows are truncated at the border and renormalised.
pub fn ssim(a: &FloatImage, b: &FloatImage) -> Result<f64> {
    check(a, b)?;
    const C1: f64 = 0.01 * 0.01;
    const C2: f64 = 0.03 * 0.03;
    let k: Vec<f64> = (-5..=5).map(|i: i32| (-(i * i) as f64 / (2.0 * 1.5 * 1.5)).exp()).collect();
    let (w, h) = (a.width(), a.height());
    let x: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let ones = vec![1.0; w * h];
    let blur = |src: &[f64]| -> Vec<f64> {
        let mut tmp = vec![0.0; w * h];
        for r in 0..h {
            for c in 0..w {
                let mut s = 0.0;
                for (o, kv) in k.iter().enumerate() {
                    let cc = c as isize + o as isize - 5;
                    if cc >= 0 && (cc as usize) < w {
                        s += kv * src[r * w + cc as usize];
                    }
                }
                tmp[r * w + c] = s;
            }
        }
        let mut out = vec![0.0; w * h];
        for r in 0..h {
            for c in 0..w {
                let mut s = 0.0;
                for (o, kv) in k.iter().enumerate() {
                    let rr = r as isize + o as isize - 5;
                    if rr >= 0 && (rr as usize) < h {
                        s += kv * tmp[rr as usize * w + c];
                    }
                }
                out[r * w + c] = s;
            }
        }
        out
    };
    let norm = blur(&ones);
    let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|s| {
        blur(s).iter().zip(&norm).map(|(v, n)| v / n).collect::<Vec<f64>>()
    });
    let mut total = 0.0;
    for i in 0..w * h {
        let vx = sxx[i] - mx[i] * mx[i];
        let vy = syy[i] - my[i] * my[i];
        let cxy = sxy[i] - mx[i] * my[i];
        total += ((2.0 * mx[i] * my[i] + C1) * (2.0 * cxy + C2))
            / ((mx[i] * mx[i] + my[i] * my[i] + C1) * (vx + vy + C2));
    }
    Ok(total / (w * h) as f64)
}
