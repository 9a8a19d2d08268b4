use crate::error::{Error, Result};

use super::moments::{moments_unchecked, soft};
use super::{assemble, check_alpha, check_lambda, EstimateSet, Method, PenalizedEstimate};

/// Settings for the numerical `L1` tuning-parameter search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Number of grid points (including zero) used to seed the refinement.
    pub grid_points: usize,
    /// Relative tolerance on the criterion, scaled by its value at zero.
    pub rel_tol: f64,
    /// Optional upper bound on λ. When set, an all-zero estimate vector
    /// returns the upper end of the search range instead of an error.
    pub cap: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            grid_points: 512,
            rel_tol: 1e-6,
            cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSearch {
    pub lambda: f64,
    pub criterion: f64,
    /// Absolute tolerance the returned criterion value is guaranteed within.
    pub tol: f64,
    /// Set when every estimate was zero and the capped upper end was returned.
    pub degenerate: bool,
}

/// Approximate MSE of soft-thresholding at `lambda`, treating each estimate
/// as normal with variance `eif_var / n`.
pub fn l1_crit(lambda: f64, est: &EstimateSet) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(crit(lambda, est))
}

fn crit(lambda: f64, est: &EstimateSet) -> f64 {
    let n = est.n as f64;
    est.psi
        .iter()
        .zip(&est.eif_var)
        .map(|(&p, &v)| {
            let (m, var) = moments_unchecked(p, v / n, lambda);
            (m - p) * (m - p) + var
        })
        .sum()
}

pub fn l1_lambda_star(est: &EstimateSet, search: &SearchConfig) -> Result<f64> {
    Ok(l1_lambda_search(est, search)?.lambda)
}

/// Minimizes [`l1_crit`] over `[0, λ_max]`, `λ_max = max|psi| + 6 max se`.
///
/// A grid of `grid_points` values (zero plus a log-spaced sweep down to
/// `1e-6 λ_max`) locates the basin; golden-section search then refines inside
/// the bracket formed by the best grid point's neighbours.
pub fn l1_lambda_search(est: &EstimateSet, search: &SearchConfig) -> Result<LambdaSearch> {
    est.validate()?;
    if search.grid_points < 3 {
        return Err(Error::invalid("search grid needs at least 3 points"));
    }
    let max_abs = est.psi.iter().fold(0.0_f64, |m, p| m.max(p.abs()));
    let max_se = est.standard_errors().into_iter().fold(0.0_f64, f64::max);
    let mut upper = max_abs + 6.0 * max_se;
    if let Some(cap) = search.cap {
        check_lambda(cap)?;
        upper = upper.min(cap);
    }
    let at_zero = crit(0.0, est);
    let tol = search.rel_tol * (at_zero + 1e-12);

    if max_abs == 0.0 {
        if search.cap.is_none() {
            return Err(Error::DegenerateParameter(
                "all estimates are zero and no cap is configured for the L1 search".into(),
            ));
        }
        return Ok(LambdaSearch {
            lambda: upper,
            criterion: crit(upper, est),
            tol,
            degenerate: true,
        });
    }
    if upper == 0.0 {
        return Ok(LambdaSearch {
            lambda: 0.0,
            criterion: at_zero,
            tol,
            degenerate: false,
        });
    }

    let n_log = search.grid_points - 1;
    let mut grid = Vec::with_capacity(search.grid_points);
    grid.push(0.0);
    for i in 0..n_log {
        let e = -6.0 + 6.0 * i as f64 / (n_log - 1) as f64;
        grid.push(upper * 10f64.powf(e));
    }
    let values: Vec<f64> = grid.iter().map(|&l| crit(l, est)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < values[b] { i } else { b });

    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (mut lambda, mut value) = golden_section(|l| crit(l, est), lo, hi, upper * 1e-12);
    if values[best] <= value {
        lambda = grid[best];
        value = values[best];
    }
    Ok(LambdaSearch {
        lambda,
        criterion: value,
        tol,
        degenerate: false,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= width {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Soft-thresholds every coordinate by `lambda`. Both interval families use
/// the unpenalized width.
pub fn l1_shrink(est: &EstimateSet, lambda: f64, alpha: f64) -> Result<PenalizedEstimate> {
    check_lambda(lambda)?;
    check_alpha(alpha)?;
    let psi_tilde = est.psi.iter().map(|&p| soft(p, lambda)).collect();
    Ok(assemble(
        est,
        Method::L1,
        lambda,
        psi_tilde,
        vec![1.0; est.dim()],
        alpha,
    ))
}
