use crate::error::{Error, Result};

use super::{assemble, check_alpha, EstimateSet, Method, PenalizedEstimate};

/// Precision-adaptive shrinkage.
///
/// Coordinate `d` is multiplied by `m / (m + eif_var[d] / n)` with
/// `m = |psi|² / (D - 1)`: the posterior mean under a `N(0, m)` prior and a
/// normal observation with variance `eif_var[d] / n`. An all-zero `psi`
/// shrinks every coordinate to zero.
pub fn eb_shrink(est: &EstimateSet, alpha: f64) -> Result<PenalizedEstimate> {
    check_alpha(alpha)?;
    let dim = est.dim();
    if dim < 2 {
        return Err(Error::invalid(
            "empirical-Bayes shrinkage needs at least two coordinates",
        ));
    }
    let prior_var = est.norm_sq() / (dim - 1) as f64;
    let n = est.n as f64;
    let shrink: Vec<f64> = est
        .eif_var
        .iter()
        .map(|&v| {
            if prior_var == 0.0 {
                0.0
            } else {
                prior_var / (prior_var + v / n)
            }
        })
        .collect();
    let psi_tilde = est.psi.iter().zip(&shrink).map(|(p, s)| p * s).collect();
    Ok(assemble(est, Method::EB, 0.0, psi_tilde, shrink, alpha))
}
