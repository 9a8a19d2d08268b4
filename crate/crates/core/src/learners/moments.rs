//! Sufficient statistics for linear learners.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Raw first and second moments of a set of rows of a data matrix.
#[derive(Debug, Clone)]
pub struct Moments {
    pub n: usize,
    pub sum: DVector<f64>,
    /// `ZᵀZ` over the rows.
    pub cross: DMatrix<f64>,
}

impl Moments {
    pub fn of_rows(data: &DMatrix<f64>, rows: &[usize]) -> Self {
        let sub = gather_rows(data, rows);
        Moments {
            n: rows.len(),
            sum: DVector::from_iterator(sub.ncols(), sub.column_iter().map(|c| c.sum())),
            cross: sub.tr_mul(&sub),
        }
    }

    pub fn zeros(p: usize) -> Self {
        Moments {
            n: 0,
            sum: DVector::zeros(p),
            cross: DMatrix::zeros(p, p),
        }
    }

    pub fn add(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += &other.sum;
        self.cross += &other.cross;
    }

    pub fn minus(&self, other: &Moments) -> Moments {
        Moments {
            n: self.n - other.n,
            sum: &self.sum - &other.sum,
            cross: &self.cross - &other.cross,
        }
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.sum[j] / self.n as f64
    }

    /// Centered cross-product `(1/n) Σ (z_j - z̄_j)(z_k - z̄_k)`.
    pub fn cov(&self, j: usize, k: usize) -> f64 {
        let n = self.n as f64;
        let v = self.cross[(j, k)] / n - self.sum[j] * self.sum[k] / (n * n);
        if j == k {
            v.max(0.0)
        } else {
            v
        }
    }
}

pub(crate) fn gather_rows(data: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), data.ncols(), |i, j| data[(rows[i], j)])
}

/// Centered and column-standardized view of a regression problem built from
/// moments: `gram = corr(X)`, `xty = cov(X, y) / sd(X)`.
#[derive(Debug, Clone)]
pub(crate) struct Standardized {
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub y_mean: f64,
    pub y_var: f64,
    /// Columns with zero variance; their coefficients stay zero.
    pub constant: Vec<bool>,
}

impl Standardized {
    pub fn new(m: &Moments, features: &[usize], target: usize) -> Result<Self> {
        if m.n < 2 {
            return Err(Error::InsufficientData(format!(
                "{} rows are not enough to fit a regression",
                m.n
            )));
        }
        let p = features.len();
        let x_mean: Vec<f64> = features.iter().map(|&j| m.mean(j)).collect();
        let mut x_sd: Vec<f64> = features.iter().map(|&j| m.cov(j, j).sqrt()).collect();
        let constant: Vec<bool> = x_sd
            .iter()
            .zip(&x_mean)
            .map(|(s, mu)| *s <= 1e-12 * mu.abs().max(1.0))
            .collect();
        for (s, c) in x_sd.iter_mut().zip(&constant) {
            if *c {
                *s = 1.0;
            }
        }
        let gram = DMatrix::from_fn(p, p, |a, b| {
            if constant[a] || constant[b] {
                if a == b {
                    1.0
                } else {
                    0.0
                }
            } else {
                m.cov(features[a], features[b]) / (x_sd[a] * x_sd[b])
            }
        });
        let xty = DVector::from_fn(p, |a, _| {
            if constant[a] {
                0.0
            } else {
                m.cov(features[a], target) / x_sd[a]
            }
        });
        Ok(Standardized {
            gram,
            xty,
            x_mean,
            x_sd,
            y_mean: m.mean(target),
            y_var: m.cov(target, target),
            constant,
        })
    }

    /// Maps standardized coefficients back to the original scale.
    pub fn unscale(&self, beta: &DVector<f64>) -> (f64, Vec<f64>) {
        let coef: Vec<f64> = beta
            .iter()
            .zip(&self.x_sd)
            .zip(&self.constant)
            .map(|((b, s), c)| if *c { 0.0 } else { b / s })
            .collect();
        let intercept = self.y_mean
            - coef
                .iter()
                .zip(&self.x_mean)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        (intercept, coef)
    }
}
