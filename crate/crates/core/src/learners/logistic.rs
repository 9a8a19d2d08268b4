//! Logistic regression by iteratively reweighted least squares, optionally
//! with an L1 penalty chosen by cross-validated log-loss.

use nalgebra::{DMatrix, DVector};

use super::{cv_assignment, lambda_path, FitWarning, LearnerConfig, LearnerKind, NuisanceFit};
use crate::error::{Error, Result};

const NEWTON_MAX_ITER: usize = 100;
const SEPARATION_RIDGE: f64 = 1e-3;
const ETA_LIMIT: f64 = 30.0;

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Clamps a probability into `[1e-6, 1 - 1e-6]`.
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(1e-6, 1.0 - 1e-6)
}

/// Design with a leading intercept column and standardized covariates.
struct Scaled {
    x: DMatrix<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Scaled {
    fn new(design: &DMatrix<f64>) -> Self {
        let (n, p) = design.shape();
        let mut mean = vec![0.0; p];
        let mut sd = vec![1.0; p];
        for j in 0..p {
            let col = design.column(j);
            let m = col.mean();
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            mean[j] = m;
            if v.sqrt() > 1e-12 * m.abs().max(1.0) {
                sd[j] = v.sqrt();
            }
        }
        let x = DMatrix::from_fn(n, p + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                (design[(i, j - 1)] - mean[j - 1]) / sd[j - 1]
            }
        });
        Scaled { x, mean, sd }
    }

    fn unscale(&self, beta: &DVector<f64>) -> (f64, Vec<f64>) {
        let coef: Vec<f64> = (0..self.sd.len()).map(|j| beta[j + 1] / self.sd[j]).collect();
        let intercept = beta[0] - coef.iter().zip(&self.mean).map(|(b, m)| b * m).sum::<f64>();
        (intercept, coef)
    }
}

fn neg_loglik(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(y)
        .map(|(e, yi)| softplus(*e) - yi * e)
        .sum::<f64>()
}

fn softplus(e: f64) -> f64 {
    if e > 0.0 {
        e + (-e).exp().ln_1p()
    } else {
        e.exp().ln_1p()
    }
}

struct NewtonResult {
    beta: DVector<f64>,
    converged: bool,
}

/// Damped Newton on `loglik - (ridge n / 2) |β_{1..}|²`. Convergence is judged
/// on the max-norm of the penalized score relative to `n`.
fn newton(x: &DMatrix<f64>, y: &[f64], ridge: f64, tol: f64) -> NewtonResult {
    let (n, q) = x.shape();
    let nf = n as f64;
    let ybar = y.iter().sum::<f64>() / nf;
    let mut beta = DVector::zeros(q);
    beta[0] = (ybar / (1.0 - ybar)).ln();
    let objective = |b: &DVector<f64>| {
        neg_loglik(x, y, b) + 0.5 * ridge * nf * b.rows(1, q - 1).norm_squared()
    };
    let mut obj = objective(&beta);
    for _ in 0..NEWTON_MAX_ITER {
        let eta = x * &beta;
        let p: Vec<f64> = eta.iter().map(|e| sigmoid(*e)).collect();
        let resid = DVector::from_fn(n, |i, _| y[i] - p[i]);
        let mut grad = x.tr_mul(&resid);
        let mut h = DMatrix::zeros(q, q);
        for i in 0..n {
            let w = (p[i] * (1.0 - p[i])).max(1e-12);
            let row = x.row(i);
            h.ger(w, &row.transpose(), &row.transpose(), 1.0);
        }
        for j in 1..q {
            grad[j] -= ridge * nf * beta[j];
            h[(j, j)] += ridge * nf;
        }
        if grad.amax() < tol * nf {
            return NewtonResult { beta, converged: true };
        }
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => {
                let mut hj = h;
                for j in 0..q {
                    hj[(j, j)] += 1e-8 * nf;
                }
                match hj.cholesky() {
                    Some(c) => c.solve(&grad),
                    None => break,
                }
            }
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = &beta + t * &step;
            let o = objective(&cand);
            if o.is_finite() && o <= obj + 1e-12 * obj.abs() {
                beta = cand;
                obj = o;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
        if (x * &beta).amax() > ETA_LIMIT && ridge == 0.0 {
            return NewtonResult { beta, converged: false };
        }
    }
    let eta = x * &beta;
    let mut grad = x.tr_mul(&DVector::from_fn(n, |i, _| y[i] - sigmoid(eta[i])));
    for j in 1..q {
        grad[j] -= ridge * nf * beta[j];
    }
    NewtonResult {
        converged: grad.amax() < tol.max(1e-6) * nf,
        beta,
    }
}

fn check_binary(y: &[f64]) -> Result<()> {
    if let Some(v) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::invalid(format!("binary outcome contains {v}")));
    }
    let ones = y.iter().filter(|v| **v == 1.0).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::Positivity(
            "binary outcome has a single class".to_string(),
        ));
    }
    Ok(())
}

/// Fits a logistic (or L1-penalized logistic) regression of `y ∈ {0,1}` on `design`.
pub fn fit_logistic(design: &DMatrix<f64>, y: &[f64], cfg: &LearnerConfig) -> Result<NuisanceFit> {
    check_binary(y)?;
    let s = Scaled::new(design);
    let mut warnings = Vec::new();
    let (beta, lambda) = match cfg.kind {
        LearnerKind::LogisticLasso => {
            let (beta, lambda) = logistic_lasso(&s.x, y, cfg)?;
            (beta, Some(lambda))
        }
        _ => {
            let fit = newton(&s.x, y, 0.0, cfg.conv_tol);
            if fit.converged && (&s.x * &fit.beta).amax() <= ETA_LIMIT {
                (fit.beta, None)
            } else {
                warnings.push(FitWarning::Separation);
                let fit = newton(&s.x, y, SEPARATION_RIDGE, cfg.conv_tol);
                if !fit.converged {
                    return Err(Error::Convergence {
                        lambda: SEPARATION_RIDGE,
                        max_iter: NEWTON_MAX_ITER,
                    });
                }
                (fit.beta, Some(SEPARATION_RIDGE))
            }
        }
    };
    let (intercept, coefficients) = s.unscale(&beta);
    Ok(NuisanceFit {
        kind: cfg.kind,
        intercept,
        n_features: coefficients.len(),
        coefficients,
        lambda,
        squared_terms: false,
        fold: None,
        warnings,
    })
}

/// Proximal Newton path for `mean negloglik + λ |β_{1..}|₁`.
fn lasso_path(x: &DMatrix<f64>, y: &[f64], grid: &[f64], cfg: &LearnerConfig) -> Result<Vec<DVector<f64>>> {
    let (n, q) = x.shape();
    let nf = n as f64;
    let ybar = y.iter().sum::<f64>() / nf;
    let mut beta = DVector::zeros(q);
    beta[0] = (ybar / (1.0 - ybar)).ln();
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let eta = x * &beta;
            let mut gram = DMatrix::zeros(q, q);
            let mut c = DVector::zeros(q);
            for i in 0..n {
                let p = sigmoid(eta[i]);
                let w = (p * (1.0 - p)).max(1e-5);
                let z = eta[i] + (y[i] - p) / w;
                let row = x.row(i).transpose();
                gram.ger(w / nf, &row, &row, 1.0);
                c.axpy(w * z / nf, &row, 1.0);
            }
            let old = beta.clone();
            weighted_cd(&gram, &c, lambda, &mut beta, cfg.max_iter, cfg.conv_tol)?;
            if (&beta - &old).amax() < cfg.conv_tol.max(1e-10) * 10.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                lambda,
                max_iter: NEWTON_MAX_ITER,
            });
        }
        out.push(beta.clone());
    }
    Ok(out)
}

/// Coordinate descent on a quadratic with the first coordinate unpenalized.
fn weighted_cd(
    gram: &DMatrix<f64>,
    c: &DVector<f64>,
    lambda: f64,
    beta: &mut DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<()> {
    let q = c.len();
    let mut r = c - gram * &*beta;
    for _ in 0..max_iter {
        let mut change = 0.0_f64;
        for j in 0..q {
            let g = gram[(j, j)];
            if g <= 0.0 {
                continue;
            }
            let old = beta[j];
            let z = r[j] + g * old;
            let new = if j == 0 {
                z / g
            } else {
                crate::penalty::soft_threshold_unchecked(z, lambda) / g
            };
            let d = new - old;
            if d != 0.0 {
                beta[j] = new;
                r.axpy(-d, &gram.column(j), 1.0);
                change = change.max(d.abs() * g.sqrt());
            }
        }
        if change <= tol {
            return Ok(());
        }
    }
    Err(Error::Convergence { lambda, max_iter })
}

fn logistic_lasso(x: &DMatrix<f64>, y: &[f64], cfg: &LearnerConfig) -> Result<(DVector<f64>, f64)> {
    let (n, q) = x.shape();
    let nf = n as f64;
    let ybar = y.iter().sum::<f64>() / nf;
    let lambda_max = (1..q)
        .map(|j| {
            (0..n).map(|i| x[(i, j)] * (y[i] - ybar)).sum::<f64>().abs() / nf
        })
        .fold(0.0_f64, f64::max);
    if lambda_max == 0.0 {
        let mut beta = DVector::zeros(q);
        beta[0] = (ybar / (1.0 - ybar)).ln();
        return Ok((beta, 0.0));
    }
    let grid = lambda_path(cfg, lambda_max);
    let folds = cv_assignment(n, cfg.cv_folds, cfg.seed);
    let mut loss = vec![0.0; grid.len()];
    for k in 0..cfg.cv_folds {
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != k).collect();
        let held: Vec<usize> = (0..n).filter(|&i| folds[i] == k).collect();
        let xt = DMatrix::from_fn(train.len(), q, |i, j| x[(train[i], j)]);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        check_binary(&yt)?;
        let xh = DMatrix::from_fn(held.len(), q, |i, j| x[(held[i], j)]);
        let yh: Vec<f64> = held.iter().map(|&i| y[i]).collect();
        for (l, beta) in lasso_path(&xt, &yt, &grid, cfg)?.iter().enumerate() {
            loss[l] += neg_loglik(&xh, &yh, beta);
        }
    }
    let best = loss
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < loss[b] { i } else { b });
    let path = lasso_path(x, y, &grid[..=best], cfg)?;
    Ok((path[best].clone(), grid[best]))
}
