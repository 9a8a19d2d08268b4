//! Nuisance regression learners.
//!
//! All linear learners work on internally standardized covariates with an
//! unpenalized intercept and report coefficients on the original scale.
//! Regularized learners choose their penalty by K-fold cross-validation
//! (squared error for continuous outcomes, log-loss for binary ones).

mod group_mean;
mod linear;
mod logistic;
mod moments;

pub use group_mean::{fit_group_mean, GroupMeans};
pub use linear::{coordinate_descent, GramCache, LinearFit};
pub use logistic::fit_logistic;
pub use moments::Moments;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LearnerKind {
    Ols,
    Ridge,
    Lasso,
    Logistic,
    LogisticLasso,
    GroupMean,
}

impl LearnerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::Ols => "ols",
            LearnerKind::Ridge => "ridge",
            LearnerKind::Lasso => "lasso",
            LearnerKind::Logistic => "logistic",
            LearnerKind::LogisticLasso => "logistic_lasso",
            LearnerKind::GroupMean => "group_mean",
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, LearnerKind::Logistic | LearnerKind::LogisticLasso)
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ols" => Ok(LearnerKind::Ols),
            "ridge" => Ok(LearnerKind::Ridge),
            "lasso" => Ok(LearnerKind::Lasso),
            "logistic" => Ok(LearnerKind::Logistic),
            "logistic_lasso" => Ok(LearnerKind::LogisticLasso),
            "group_mean" => Ok(LearnerKind::GroupMean),
            other => Err(Error::invalid(format!("unknown learner `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub cv_folds: usize,
    /// Length of the data-scaled penalty grid when `lambda_grid` is unset.
    pub n_lambda: usize,
    /// Smallest grid value as a fraction of the largest.
    pub lambda_min_ratio: f64,
    /// Explicit penalty grid, sorted descending.
    pub lambda_grid: Option<Vec<f64>>,
    pub max_iter: usize,
    pub conv_tol: f64,
    /// Append squared copies of every covariate to the design.
    pub squared_terms: bool,
    /// Seed for the cross-validation split.
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerConfig {
            kind,
            cv_folds: 5,
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
            lambda_grid: None,
            max_iter: 10_000,
            conv_tol: 1e-7,
            squared_terms: false,
            seed: 0,
        }
    }

    pub fn with_squares(mut self, on: bool) -> Self {
        self.squared_terms = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cv_folds < 2 {
            return Err(Error::invalid("cv_folds must be at least 2"));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::invalid("conv_tol must be positive"));
        }
        if self.n_lambda < 1 || !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::invalid("lambda grid settings are out of range"));
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0)) {
                return Err(Error::invalid("lambda_grid values must be positive"));
            }
            if grid.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::invalid("lambda_grid must be sorted descending"));
            }
        }
        Ok(())
    }

    /// Cross-validation folds a [`GramCache`] needs for this learner.
    pub fn cache_folds(&self) -> usize {
        match self.kind {
            LearnerKind::Ridge | LearnerKind::Lasso => self.cv_folds,
            _ => 0,
        }
    }

    /// Fits a continuous learner from cached moments. A lasso that fails to
    /// converge is replaced by ridge and reported with a warning.
    pub fn fit_cached(
        &self,
        cache: &GramCache,
        features: &[usize],
        target: usize,
    ) -> Result<(LinearFit, Option<FitWarning>)> {
        match self.kind {
            LearnerKind::Ols => Ok((cache.fit_ols(features, target)?, None)),
            LearnerKind::Ridge => Ok((cache.fit_ridge(features, target, self)?, None)),
            LearnerKind::Lasso => match cache.fit_lasso(features, target, self) {
                Ok(fit) => Ok((fit, None)),
                Err(e) => {
                    log::warn!("lasso failed ({e}); falling back to ridge");
                    let fit = cache.fit_ridge(features, target, self)?;
                    Ok((fit, Some(FitWarning::RidgeFallback)))
                }
            },
            other => Err(Error::invalid(format!(
                "{} is not a continuous regression learner",
                other.as_str()
            ))),
        }
    }

    /// Fits this learner on raw covariates `x` (rows are observations).
    pub fn fit(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<NuisanceFit> {
        self.validate()?;
        if x.nrows() != y.len() {
            return Err(Error::invalid(format!(
                "design has {} rows but outcome has {}",
                x.nrows(),
                y.len()
            )));
        }
        let design = expand(x, self.squared_terms);
        let mut fit = match self.kind {
            LearnerKind::Ols | LearnerKind::Ridge | LearnerKind::Lasso => {
                let z = append_column(&design, y);
                let rows: Vec<usize> = (0..z.nrows()).collect();
                let p = design.ncols();
                let features: Vec<usize> = (0..p).collect();
                let cache = GramCache::new(&z, &rows, self.cache_folds(), self.seed)?;
                let (lin, warning) = self.fit_cached(&cache, &features, p)?;
                let mut fit = NuisanceFit::from_linear(self.kind, lin);
                fit.warnings.extend(warning);
                fit
            }
            LearnerKind::Logistic | LearnerKind::LogisticLasso => fit_logistic(&design, y, self)?,
            LearnerKind::GroupMean => {
                return Err(Error::invalid(
                    "group_mean is fit with fit_group_mean on a group column",
                ))
            }
        };
        fit.squared_terms = self.squared_terms;
        fit.n_features = x.ncols();
        Ok(fit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FitWarning {
    /// Logistic coefficients diverged; a ridge-stabilized fit was returned.
    Separation,
    /// The primary learner failed and a ridge fit was substituted.
    RidgeFallback,
}

/// A fitted (generalized) linear nuisance regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceFit {
    pub kind: LearnerKind,
    pub intercept: f64,
    /// Coefficients on the (possibly squared-term expanded) design.
    pub coefficients: Vec<f64>,
    /// Penalty chosen by cross-validation, if any.
    pub lambda: Option<f64>,
    pub squared_terms: bool,
    /// Raw covariate dimension the fit expects.
    pub n_features: usize,
    pub fold: Option<usize>,
    pub warnings: Vec<FitWarning>,
}

impl NuisanceFit {
    pub(crate) fn from_linear(kind: LearnerKind, lin: LinearFit) -> Self {
        NuisanceFit {
            kind,
            intercept: lin.intercept,
            n_features: lin.coef.len(),
            coefficients: lin.coef,
            lambda: lin.lambda,
            squared_terms: false,
            fold: None,
            warnings: Vec::new(),
        }
    }

    /// Linear predictor for one raw covariate row.
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.n_features);
        let p = row.len();
        let mut eta = self.intercept;
        for (j, v) in row.iter().enumerate() {
            eta += self.coefficients[j] * v;
            if self.squared_terms {
                eta += self.coefficients[p + j] * v * v;
            }
        }
        eta
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let eta = self.linear_predictor(row);
        if self.kind.is_binary() {
            logistic::clamp_prob(logistic::sigmoid(eta))
        } else {
            eta
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::invalid(format!(
                "fit expects {} covariates, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        let mut row = vec![0.0; x.ncols()];
        Ok(DVector::from_fn(x.nrows(), |i, _| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = x[(i, j)];
            }
            self.predict_row(&row)
        }))
    }
}

/// `[x, x∘x]` when `squares` is set, otherwise a copy of `x`.
pub fn expand(x: &DMatrix<f64>, squares: bool) -> DMatrix<f64> {
    if !squares {
        return x.clone();
    }
    let p = x.ncols();
    DMatrix::from_fn(x.nrows(), 2 * p, |i, j| {
        if j < p {
            x[(i, j)]
        } else {
            x[(i, j - p)] * x[(i, j - p)]
        }
    })
}

pub(crate) fn append_column(x: &DMatrix<f64>, y: &[f64]) -> DMatrix<f64> {
    let p = x.ncols();
    DMatrix::from_fn(x.nrows(), p + 1, |i, j| if j < p { x[(i, j)] } else { y[i] })
}

/// Random balanced split of `n` positions into `k` folds, labelled `0..k`.
pub fn cv_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

pub(crate) fn lambda_path(cfg: &LearnerConfig, lambda_max: f64) -> Vec<f64> {
    if let Some(grid) = &cfg.lambda_grid {
        return grid.clone();
    }
    let m = cfg.n_lambda;
    if m == 1 {
        return vec![lambda_max];
    }
    let ratio = cfg.lambda_min_ratio.ln();
    (0..m)
        .map(|i| lambda_max * (ratio * i as f64 / (m - 1) as f64).exp())
        .collect()
}
