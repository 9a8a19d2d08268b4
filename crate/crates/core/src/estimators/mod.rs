//! Cross-fitted one-step estimators and their influence functions.

mod dataset;
mod folds;
mod group_ate;
mod indirect_std;
mod linear_assoc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{FitWarning, LearnerConfig, LearnerKind};
use crate::penalty::EstimateSet;

pub use dataset::{Dataset, Roles};
pub use folds::{make_folds, FoldAssignment};
pub use group_ate::{onestep_group_ate, onestep_group_ate_with, GroupAteOverrides};
pub use indirect_std::{onestep_indirect_std, srr};
pub use linear_assoc::onestep_linear_assoc;

/// Per-observation influence-function values, one column per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct EifMatrix {
    pub values: DMatrix<f64>,
    pub centered: bool,
}

impl EifMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Subtracts each column mean.
    pub fn center(&mut self) {
        for mut col in self.values.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
        self.centered = true;
    }
}

/// Column variances with denominator `n`.
pub fn eif_variance(eif: &EifMatrix) -> Result<Vec<f64>> {
    let n = eif.n_rows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "variance needs at least 2 rows, got {n}"
        )));
    }
    Ok(eif
        .values
        .column_iter()
        .map(|col| {
            let m = col.mean();
            col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64
        })
        .collect())
}

/// Tuning for the cross-fitted estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepOptions {
    /// Number of cross-fitting folds `K`.
    pub folds: usize,
    pub seed: u64,
    /// Learner for continuous regressions (outcome models, and covariate
    /// models for the linear association).
    pub outcome_learner: LearnerConfig,
    /// Learner for binary treatment / provider membership.
    pub propensity_learner: LearnerConfig,
    /// Propensities are truncated to `[truncation, 1 - truncation]`.
    pub truncation: f64,
    /// Linear association only: report coefficients on the regression scale.
    pub scaled: bool,
}

impl Default for OneStepOptions {
    fn default() -> Self {
        OneStepOptions {
            folds: 5,
            seed: 0,
            outcome_learner: LearnerConfig::new(LearnerKind::Ols),
            propensity_learner: LearnerConfig::new(LearnerKind::Logistic),
            truncation: 0.01,
            scaled: true,
        }
    }
}

impl OneStepOptions {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid(format!("need at least 2 folds, got {}", self.folds)));
        }
        if !(self.truncation >= 0.0 && self.truncation < 0.5) {
            return Err(Error::invalid(format!(
                "truncation must lie in [0, 0.5), got {}",
                self.truncation
            )));
        }
        if self.outcome_learner.kind.is_binary() || self.outcome_learner.kind == LearnerKind::GroupMean {
            return Err(Error::invalid(format!(
                "outcome learner must be a continuous regression, got {}",
                self.outcome_learner.kind.as_str()
            )));
        }
        if !self.propensity_learner.kind.is_binary() {
            return Err(Error::invalid(format!(
                "propensity learner must be binary, got {}",
                self.propensity_learner.kind.as_str()
            )));
        }
        self.outcome_learner.validate()?;
        self.propensity_learner.validate()
    }
}

/// Fold-level pieces of the one-step estimate: `plug_in + correction`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldTerms {
    pub size: usize,
    pub plug_in: Vec<f64>,
    pub correction: Vec<f64>,
}

impl FoldTerms {
    pub fn estimate(&self) -> Vec<f64> {
        self.plug_in.iter().zip(&self.correction).map(|(a, b)| a + b).collect()
    }
}

/// Output of a one-step estimator.
#[derive(Debug, Clone)]
pub struct OneStep {
    pub estimate: EstimateSet,
    pub eif: EifMatrix,
    pub folds: FoldAssignment,
    /// Unscaled fold-level decomposition; the size-weighted average of the
    /// fold estimates is the unscaled point estimate.
    pub fold_terms: Vec<FoldTerms>,
    /// Linear association with `scaled`: the per-coordinate residual
    /// variance each estimate was divided by.
    pub scale: Option<Vec<f64>>,
    pub warnings: Vec<FitWarning>,
}

impl OneStep {
    pub fn into_parts(self) -> (EstimateSet, EifMatrix) {
        (self.estimate, self.eif)
    }

    /// Size-weighted combination of the fold estimates.
    pub fn pooled_fold_estimate(&self) -> Vec<f64> {
        pool(&self.fold_terms, self.estimate.dim())
    }
}

/// Weighted average `Σ_k (N_k / n) v_k` of per-fold vectors.
fn pool(terms: &[FoldTerms], dim: usize) -> Vec<f64> {
    let n: usize = terms.iter().map(|t| t.size).sum();
    let mut out = vec![0.0; dim];
    for t in terms {
        for (o, e) in out.iter_mut().zip(t.estimate()) {
            *o += t.size as f64 * e;
        }
    }
    out.iter().map(|v| v / n as f64).collect()
}

fn finish(
    psi: Vec<f64>,
    mut eif: EifMatrix,
    labels: Vec<String>,
    folds: FoldAssignment,
    fold_terms: Vec<FoldTerms>,
    scale: Option<Vec<f64>>,
    warnings: Vec<FitWarning>,
) -> Result<OneStep> {
    if !eif.centered {
        eif.center();
    }
    let eif_var = eif_variance(&eif)?;
    let estimate = EstimateSet::new(psi, eif_var, eif.n_rows())?.with_labels(labels)?;
    Ok(OneStep {
        estimate,
        eif,
        folds,
        fold_terms,
        scale,
        warnings,
    })
}
