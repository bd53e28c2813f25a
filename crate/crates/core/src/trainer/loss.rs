use crate::{Error, Result};

/// Mean squared error between predicted detection probabilities and observed
/// bits, with gradient `2 (p - b) / n` per element.
pub fn quanta_loss(predicted: &[f64], observed: &[u8]) -> Result<(f64, Vec<f64>)> {
    if predicted.len() != observed.len() {
        return Err(Error::mismatch(predicted.len(), observed.len()));
    }
    if observed.iter().any(|&b| b > 1) {
        return Err(Error::invalid("binary observations must be 0 or 1"));
    }
    let obs: Vec<f64> = observed.iter().map(|&b| b as f64).collect();
    mse(predicted, &obs)
}

/// Mean squared error between predicted and observed intensities.
pub fn conventional_loss(predicted: &[f64], observed: &[f64]) -> Result<(f64, Vec<f64>)> {
    if predicted.len() != observed.len() {
        return Err(Error::mismatch(predicted.len(), observed.len()));
    }
    mse(predicted, observed)
}

fn mse(predicted: &[f64], observed: &[f64]) -> Result<(f64, Vec<f64>)> {
    if predicted.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let n = predicted.len() as f64;
    let mut loss = 0.0;
    let grad = predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| {
            let d = p - o;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(quanta_loss(&[0.0, 1.0], &[0, 1]).unwrap().0, 0.0);
        assert_eq!(quanta_loss(&[0.5; 5], &[0, 1, 1, 0, 1]).unwrap().0, 0.25);
        let (l, _) = conventional_loss(&[0.3, 0.7], &[0.2, 0.6]).unwrap();
        assert!((l - 0.01).abs() < 1e-15);
        assert!(quanta_loss(&[0.5], &[0, 1]).is_err());
        assert!(quanta_loss(&[0.5], &[2]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p: Vec<f64> = (0..10).map(|i| 0.05 + 0.09 * i as f64).collect();
        let o: Vec<f64> = (0..10).map(|i| ((i * 7) % 10) as f64 / 10.0).collect();
        let (_, g) = conventional_loss(&p, &o).unwrap();
        let h = 1e-6;
        for i in 0..10 {
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (conventional_loss(&a, &o).unwrap().0 - conventional_loss(&b, &o).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }
}
