//! Least squares, ridge and lasso on cached sufficient statistics.

use nalgebra::{DMatrix, DVector};

use super::moments::{gather_rows, Moments, Standardized};
use super::{cv_assignment, lambda_path, LearnerConfig};
use crate::error::{Error, Result};

/// Intercept and original-scale coefficients of a linear fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub lambda: Option<f64>,
}

impl LinearFit {
    pub(crate) fn predict_rows(&self, data: &DMatrix<f64>, rows: &[usize], features: &[usize]) -> Vec<f64> {
        rows.iter()
            .map(|&i| {
                self.intercept
                    + features
                        .iter()
                        .zip(&self.coef)
                        .map(|(&j, b)| data[(i, j)] * b)
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Moments of a set of training rows and of its cross-validation splits.
///
/// Any column subset can serve as features and any other column as the
/// target, so one cache serves every regression on the same rows.
pub struct GramCache<'a> {
    data: &'a DMatrix<f64>,
    full: Moments,
    /// `(training moments, held-out rows)` for each CV fold.
    folds: Vec<(Moments, Vec<usize>)>,
}

impl<'a> GramCache<'a> {
    /// `cv_folds = 0` skips the cross-validation splits (OLS only).
    pub fn new(data: &'a DMatrix<f64>, rows: &[usize], cv_folds: usize, seed: u64) -> Result<Self> {
        if cv_folds > 0 && rows.len() < 2 * cv_folds {
            return Err(Error::InsufficientData(format!(
                "{} rows cannot be split into {} cross-validation folds",
                rows.len(),
                cv_folds
            )));
        }
        let mut folds = Vec::with_capacity(cv_folds);
        let full;
        if cv_folds > 0 {
            let assign = cv_assignment(rows.len(), cv_folds, seed);
            let mut held: Vec<Vec<usize>> = vec![Vec::new(); cv_folds];
            for (pos, &f) in assign.iter().enumerate() {
                held[f].push(rows[pos]);
            }
            let parts: Vec<Moments> = held.iter().map(|h| Moments::of_rows(data, h)).collect();
            let mut total = Moments::zeros(data.ncols());
            for p in &parts {
                total.add(p);
            }
            for (p, h) in parts.iter().zip(held) {
                folds.push((total.minus(p), h));
            }
            full = total;
        } else {
            full = Moments::of_rows(data, rows);
        }
        Ok(GramCache { data, full, folds })
    }

    pub fn n_rows(&self) -> usize {
        self.full.n
    }

    /// Ordinary least squares with an intercept. A jitter of `1e-10` is added
    /// to the standardized Gram matrix when it is numerically singular.
    pub fn fit_ols(&self, features: &[usize], target: usize) -> Result<LinearFit> {
        if self.full.n <= features.len() + 1 {
            return Err(Error::Underdetermined {
                n_rows: self.full.n,
                n_cols: features.len() + 1,
            });
        }
        let s = Standardized::new(&self.full, features, target)?;
        let beta = solve_spd(&s.gram, &s.xty, 0.0)
            .or_else(|| solve_spd(&s.gram, &s.xty, 1e-10))
            .ok_or_else(|| Error::invalid("least-squares system is singular"))?;
        let (intercept, coef) = s.unscale(&beta);
        Ok(LinearFit {
            intercept,
            coef,
            lambda: None,
        })
    }

    /// Ridge regression, `(1/2n)|y - Xb|² + (λ/2)|b|²` on standardized `X`.
    pub fn fit_ridge(&self, features: &[usize], target: usize, cfg: &LearnerConfig) -> Result<LinearFit> {
        let grid = match &cfg.lambda_grid {
            Some(g) => g.clone(),
            None => lambda_path(cfg, 1e3),
        };
        let solve_path = |s: &Standardized| -> Result<Vec<DVector<f64>>> {
            grid.iter()
                .map(|&l| {
                    solve_spd(&s.gram, &s.xty, l)
                        .ok_or_else(|| Error::invalid("ridge system is singular"))
                })
                .collect()
        };
        let chosen = self.cross_validate(features, target, &grid, solve_path)?;
        let s = Standardized::new(&self.full, features, target)?;
        let beta = solve_spd(&s.gram, &s.xty, grid[chosen])
            .ok_or_else(|| Error::invalid("ridge system is singular"))?;
        let (intercept, coef) = s.unscale(&beta);
        Ok(LinearFit {
            intercept,
            coef,
            lambda: Some(grid[chosen]),
        })
    }

    /// Lasso, `(1/2n)|y - Xb|² + λ|b|₁` on standardized `X`, with λ chosen by
    /// cross-validated squared error along a warm-started path.
    pub fn fit_lasso(&self, features: &[usize], target: usize, cfg: &LearnerConfig) -> Result<LinearFit> {
        let s = Standardized::new(&self.full, features, target)?;
        let lambda_max = s.xty.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if lambda_max == 0.0 {
            let (intercept, coef) = s.unscale(&DVector::zeros(features.len()));
            return Ok(LinearFit {
                intercept,
                coef,
                lambda: None,
            });
        }
        let grid = lambda_path(cfg, lambda_max);
        let tol = cfg.conv_tol * s.y_var.max(1e-300);
        let chosen = self.cross_validate(features, target, &grid, |fold| {
            lasso_path(fold, &grid, cfg.max_iter, tol)
        })?;
        let path = lasso_path(&s, &grid[..=chosen], cfg.max_iter, tol)?;
        let (intercept, coef) = s.unscale(&path[chosen]);
        Ok(LinearFit {
            intercept,
            coef,
            lambda: Some(grid[chosen]),
        })
    }

    /// Lasso at a single λ on all rows, without cross-validation.
    pub fn lasso_at(
        &self,
        features: &[usize],
        target: usize,
        lambda: f64,
        max_iter: usize,
        conv_tol: f64,
    ) -> Result<LinearFit> {
        let s = Standardized::new(&self.full, features, target)?;
        let tol = conv_tol * s.y_var.max(1e-300);
        let mut beta = DVector::zeros(features.len());
        coordinate_descent(&s.gram, &s.xty, lambda, &mut beta, &s.constant, max_iter, tol)?;
        let (intercept, coef) = s.unscale(&beta);
        Ok(LinearFit {
            intercept,
            coef,
            lambda: Some(lambda),
        })
    }

    /// Index of the grid value with the smallest pooled held-out squared error.
    fn cross_validate<F>(&self, features: &[usize], target: usize, grid: &[f64], path: F) -> Result<usize>
    where
        F: Fn(&Standardized) -> Result<Vec<DVector<f64>>>,
    {
        if self.folds.is_empty() {
            return Err(Error::invalid("cross-validation requested without folds"));
        }
        let mut sse = vec![0.0; grid.len()];
        for (train, held) in &self.folds {
            let s = Standardized::new(train, features, target)?;
            let betas = path(&s)?;
            let x_held = gather_cols(&gather_rows(self.data, held), features);
            let y_held: Vec<f64> = held.iter().map(|&i| self.data[(i, target)]).collect();
            for (k, beta) in betas.iter().enumerate() {
                let (intercept, coef) = s.unscale(beta);
                let coef = DVector::from_vec(coef);
                let pred = &x_held * coef;
                sse[k] += pred
                    .iter()
                    .zip(&y_held)
                    .map(|(p, y)| (y - p - intercept).powi(2))
                    .sum::<f64>();
            }
        }
        Ok(argmin(&sse))
    }

    #[cfg(test)]
    pub(crate) fn predict_training(&self, fit: &LinearFit, rows: &[usize], features: &[usize]) -> Vec<f64> {
        fit.predict_rows(self.data, rows, features)
    }
}

fn gather_cols(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |b, (i, x)| if *x < v[b] { i } else { b })
}

/// Cholesky solve of `(A + ridge I) x = b`; `None` when not positive definite.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += ridge;
    }
    m.cholesky().map(|c| c.solve(b))
}

/// Warm-started lasso path. Once the fit explains more than 99.9% of the
/// variance, or a step along the path improves it by less than 1e-5
/// (relative), the remaining grid points reuse the last solution.
fn lasso_path(s: &Standardized, grid: &[f64], max_iter: usize, tol: f64) -> Result<Vec<DVector<f64>>> {
    let mut beta = DVector::zeros(s.xty.len());
    let mut out = Vec::with_capacity(grid.len());
    let mut prev_rss = s.y_var;
    let mut saturated = false;
    for &lambda in grid {
        if !saturated {
            coordinate_descent(&s.gram, &s.xty, lambda, &mut beta, &s.constant, max_iter, tol)?;
            // residual variance: y_var - 2 bᵀc + bᵀ G b
            let gb = &s.gram * &beta;
            let rss = (s.y_var - 2.0 * beta.dot(&s.xty) + beta.dot(&gb)).max(0.0);
            let explained_gain = (prev_rss - rss) / s.y_var.max(1e-300);
            if rss <= 1e-3 * s.y_var || (out.len() > 0 && explained_gain < 1e-5 && beta.iter().any(|b| *b != 0.0)) {
                saturated = true;
            }
            prev_rss = rss;
        }
        out.push(beta.clone());
    }
    Ok(out)
}

/// Cyclic coordinate descent for `½ bᵀ G b - cᵀ b + λ |b|₁`, warm-started
/// from `beta`. Coordinates flagged in `skip` stay at zero. Converges when no
/// coordinate update in a full pass has `G_jj Δ_j² > tol`. Returns the number
/// of passes.
pub fn coordinate_descent(
    gram: &DMatrix<f64>,
    c: &DVector<f64>,
    lambda: f64,
    beta: &mut DVector<f64>,
    skip: &[bool],
    max_iter: usize,
    tol: f64,
) -> Result<usize> {
    let p = c.len();
    // gradient residual r = c - G b
    let mut r = c - gram * &*beta;
    for pass in 1..=max_iter {
        let mut max_change = 0.0_f64;
        for j in 0..p {
            if skip[j] {
                continue;
            }
            let g = gram[(j, j)];
            if g <= 0.0 {
                continue;
            }
            let old = beta[j];
            let z = r[j] + g * old;
            let new = crate::penalty::soft_threshold_unchecked(z, lambda) / g;
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                r.axpy(-delta, &gram.column(j), 1.0);
                max_change = max_change.max(g * delta * delta);
            }
        }
        if max_change <= tol {
            return Ok(pass);
        }
    }
    Err(Error::Convergence { lambda, max_iter })
}
