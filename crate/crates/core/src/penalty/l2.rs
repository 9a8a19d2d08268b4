use crate::error::{Error, Result};

use super::{assemble, check_alpha, check_lambda, EstimateSet, Method, PenalizedEstimate};

/// Ratio of the total influence-function variance to the squared norm of the
/// estimates, `sum(eif_var) / |psi|²`.
pub fn gamma(est: &EstimateSet) -> Result<f64> {
    let norm_sq = est.norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::DegenerateParameter(
            "all estimates are zero; gamma is undefined".into(),
        ));
    }
    Ok(est.trace() / norm_sq)
}

/// Asymptotic MSE of `psi / (1 + λ)` relative to `psi`.
pub fn l2_crit(lambda: f64, est: &EstimateSet) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(crit(lambda, est.norm_sq(), est.trace(), est.n as f64))
}

#[inline]
pub(crate) fn crit(lambda: f64, norm_sq: f64, trace: f64, n: f64) -> f64 {
    let s = 1.0 + lambda;
    lambda * lambda / (s * s) * norm_sq + trace / (n * s * s)
}

/// Closed-form minimizer of [`l2_crit`]: `gamma / n`.
pub fn l2_lambda_star(est: &EstimateSet) -> Result<f64> {
    Ok(gamma(est)? / est.n as f64)
}

/// Scales every coordinate by `1 / (1 + λ)`.
pub fn l2_shrink(est: &EstimateSet, lambda: f64, alpha: f64) -> Result<PenalizedEstimate> {
    check_lambda(lambda)?;
    check_alpha(alpha)?;
    let factor = 1.0 / (1.0 + lambda);
    let psi_tilde = est.psi.iter().map(|p| p / (1.0 + lambda)).collect();
    Ok(assemble(
        est,
        Method::L2,
        lambda,
        psi_tilde,
        vec![factor; est.dim()],
        alpha,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::two_sided_critical;

    fn set(psi: &[f64], var: &[f64], n: usize) -> EstimateSet {
        EstimateSet::new(psi.to_vec(), var.to_vec(), n).unwrap()
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(&set(&[1.0, 1.0], &[2.0, 2.0], 10)).unwrap(), 2.0);
        assert_eq!(gamma(&set(&[3.0, 4.0], &[0.0, 0.0], 10)).unwrap(), 0.0);
        assert!(matches!(
            gamma(&set(&[0.0, 0.0], &[1.0, 3.0], 10)),
            Err(Error::DegenerateParameter(_))
        ));
    }

    #[test]
    fn crit_examples() {
        let est = set(&[1.0, 1.0], &[1.0, 1.0], 100);
        assert!((l2_crit(0.0, &est).unwrap() - 0.02).abs() < 1e-15);
        assert!((l2_crit(1e12, &est).unwrap() - 2.0).abs() < 1e-9);
        // independent re-evaluation at λ = 0.01
        let l: f64 = 0.01;
        let expected = (l / (1.0 + l)).powi(2) * 2.0 + 2.0 / (100.0 * (1.0 + l).powi(2));
        assert!((l2_crit(l, &est).unwrap() - expected).abs() < 1e-16);
        assert!(l2_crit(-0.1, &est).is_err());
    }

    #[test]
    fn lambda_star_examples() {
        assert!((l2_lambda_star(&set(&[1.0, 1.0], &[1.0, 1.0], 100)).unwrap() - 0.01).abs() < 1e-16);
        assert_eq!(l2_lambda_star(&set(&[1.0, -2.0], &[0.0, 0.0], 100)).unwrap(), 0.0);
    }

    #[test]
    fn lambda_star_matches_grid() {
        let est = set(&[0.5, -1.2, 0.0], &[1.0, 0.25, 4.0], 200);
        let closed = l2_lambda_star(&est).unwrap();
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=1_000_000 {
            let l = i as f64 * 1e-5;
            let v = l2_crit(l, &est).unwrap();
            if v < best.1 {
                best = (l, v);
            }
        }
        assert!((best.0 - closed).abs() < 2e-5, "grid {} vs closed {}", best.0, closed);
    }

    #[test]
    fn shrink_examples() {
        let est = set(&[2.0, -4.0], &[1.0, 1.0], 10);
        let out = l2_shrink(&est, 1.0, 0.05).unwrap();
        assert_eq!(out.psi_tilde, vec![1.0, -2.0]);
        assert_eq!(out.shrink_factor, vec![0.5, 0.5]);

        let same = l2_shrink(&est, 0.0, 0.05).unwrap();
        assert_eq!(same.psi_tilde, est.psi);
        assert_eq!(same.ci_basic, same.ci_shrunk);
    }

    #[test]
    fn intervals_at_lambda_star() {
        let est = set(&[1.0, 1.0], &[1.0, 1.0], 100);
        let out = l2_shrink(&est, 0.01, 0.05).unwrap();
        let q = 1.959_963_984_540_054;
        assert!((two_sided_critical(0.05) - q).abs() < 1e-12);
        let ci = out.ci_basic[0];
        assert!((ci.lower - (1.0 / 1.01 - q * 0.1)).abs() < 1e-12);
        assert!((ci.upper - (1.0 / 1.01 + q * 0.1)).abs() < 1e-12);
        let shrunk = out.ci_shrunk[0];
        assert!((shrunk.width() - ci.width() / 1.01).abs() < 1e-12);
        assert!(shrunk.is_subset_of(&ci));
    }
}
