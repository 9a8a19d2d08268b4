use crate::error::Result;
use crate::normal::{cdf, pdf, sf};

use super::check_lambda;

/// Soft-thresholding operator `S_λ(x) = sign(x) max(|x| - λ, 0)`.
pub fn soft_threshold(x: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(soft(x, lambda))
}

pub fn soft_threshold_vec(x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    Ok(x.iter().map(|&v| soft(v, lambda)).collect())
}

#[inline]
pub(crate) fn soft(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Mean and variance of `S_λ(Z)` for `Z ~ N(mu, var)`.
///
/// Splits the expectation over the two tails `Z > λ` and `Z < -λ`; the
/// upper tail uses the survival function so no mass is lost to cancellation.
/// The variance is clamped at zero.
pub fn st_normal_moments(mu: f64, var: f64, lambda: f64) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    if !(var >= 0.0 && var.is_finite()) {
        return Err(crate::Error::invalid(format!(
            "variance = {var} must be finite and non-negative"
        )));
    }
    Ok(moments_unchecked(mu, var, lambda))
}

pub(crate) fn moments_unchecked(mu: f64, var: f64, lambda: f64) -> (f64, f64) {
    if var == 0.0 {
        return (soft(mu, lambda), 0.0);
    }
    let sd = var.sqrt();
    let a = (lambda - mu) / sd;
    let b = (-lambda - mu) / sd;
    let upper = sf(a);
    let lower = cdf(b);
    let pa = sd * pdf(a);
    let pb = sd * pdf(b);
    let hi = mu - lambda;
    let lo = mu + lambda;

    let mean = hi * upper + lo * lower + pa - pb;
    let second = (hi * hi + var) * upper + hi * pa + (lo * lo + var) * lower - lo * pb;
    (mean, (second - mean * mean).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_branches() {
        assert_eq!(soft_threshold(2.0, 0.5).unwrap(), 1.5);
        assert_eq!(soft_threshold(0.3, 0.5).unwrap(), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5).unwrap(), -1.5);
        assert_eq!(soft_threshold(0.5, 0.5).unwrap(), 0.0);
        assert!(soft_threshold(1.0, -0.1).is_err());
        assert_eq!(
            soft_threshold_vec(&[0.1, 0.2, 5.0], 0.3).unwrap(),
            vec![0.0, 0.0, 4.7]
        );
    }

    #[test]
    fn zero_variance_limit() {
        let (m, v) = st_normal_moments(1.0, 0.0, 0.4).unwrap();
        assert!((m - 0.6).abs() < 1e-15);
        assert_eq!(v, 0.0);
        // tiny but positive variance approaches the same limit
        let (m, v) = st_normal_moments(1.0, 1e-14, 0.4).unwrap();
        assert!((m - 0.6).abs() < 1e-9);
        assert!(v < 1e-12);
    }

    #[test]
    fn zero_lambda_is_identity() {
        let (m, v) = st_normal_moments(0.7, 2.3, 0.0).unwrap();
        assert!((m - 0.7).abs() < 1e-12);
        assert!((v - 2.3).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_mu() {
        let (m1, v1) = st_normal_moments(0.8, 0.5, 0.3).unwrap();
        let (m2, v2) = st_normal_moments(-0.8, 0.5, 0.3).unwrap();
        assert!((m1 + m2).abs() < 1e-14);
        assert!((v1 - v2).abs() < 1e-14);
    }

    #[test]
    fn rejects_negative_inputs() {
        assert!(st_normal_moments(0.0, -1.0, 0.1).is_err());
        assert!(st_normal_moments(0.0, 1.0, -0.1).is_err());
    }
}
