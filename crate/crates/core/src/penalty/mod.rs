//! Penalized post-processing of a vector of efficient estimates.
//!
//! Every method takes an [`EstimateSet`] (point estimates, per-coordinate
//! influence-function variances and the sample size behind them) and returns
//! a [`PenalizedEstimate`] with shrunken point estimates and two families of
//! confidence intervals:
//!
//! * `ci_basic`: centered at the penalized estimate with the width of the
//!   unpenalized interval, `2 q sqrt(eif_var / n)`.
//! * `ci_shrunk`: same center, width multiplied by the coordinate's shrinkage
//!   factor (identical to `ci_basic` for `L1` and `None`).

mod eb;
mod influence;
mod l1;
mod l2;
mod moments;

pub use eb::eb_shrink;
pub use influence::{
    default_sigma2_eif, gamma_eif, general_penalized_eif, lambda_star_eif, PenaltyObjective,
    SquaredErrorL2, WeightedSquaredErrorL2,
};
pub use l1::{l1_crit, l1_lambda_search, l1_lambda_star, l1_shrink, LambdaSearch, SearchConfig};
pub use l2::{gamma, l2_crit, l2_lambda_star, l2_shrink};
pub use moments::{soft_threshold, soft_threshold_vec, st_normal_moments};
pub(crate) use moments::soft as soft_threshold_unchecked;

use crate::error::{Error, Result};
use crate::normal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Point estimates with their influence-function variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub psi: Vec<f64>,
    /// Per-coordinate variance of the efficient influence function.
    pub eif_var: Vec<f64>,
    /// Sample size behind the estimates.
    pub n: usize,
    pub labels: Option<Vec<String>>,
}

impl EstimateSet {
    pub fn new(psi: Vec<f64>, eif_var: Vec<f64>, n: usize) -> Result<Self> {
        let est = EstimateSet {
            psi,
            eif_var,
            n,
            labels: None,
        };
        est.validate()?;
        Ok(est)
    }

    /// Builds a set from reported standard errors, using `eif_var = se² n`.
    pub fn from_standard_errors(psi: Vec<f64>, se: &[f64], n: usize) -> Result<Self> {
        let eif_var = se.iter().map(|s| s * s * n as f64).collect();
        Self::new(psi, eif_var, n)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.psi.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} coordinates",
                labels.len(),
                self.psi.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.psi.is_empty() {
            return Err(Error::invalid("estimate set must have at least one coordinate"));
        }
        if self.psi.len() != self.eif_var.len() {
            return Err(Error::invalid(format!(
                "psi has length {} but eif_var has length {}",
                self.psi.len(),
                self.eif_var.len()
            )));
        }
        if self.n == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        if let Some(d) = self.psi.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("psi[{d}] is not finite")));
        }
        if let Some(d) = self.eif_var.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!(
                "eif_var[{d}] = {} must be finite and non-negative",
                self.eif_var[d]
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.psi.len() {
                return Err(Error::invalid("labels length does not match psi"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    /// Standard error of coordinate `d`: `sqrt(eif_var[d] / n)`.
    pub fn se(&self, d: usize) -> f64 {
        (self.eif_var[d] / self.n as f64).sqrt()
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.dim()).map(|d| self.se(d)).collect()
    }

    pub fn label(&self, d: usize) -> String {
        match &self.labels {
            Some(l) => l[d].clone(),
            None => format!("{}", d + 1),
        }
    }

    pub(crate) fn norm_sq(&self) -> f64 {
        self.psi.iter().map(|p| p * p).sum()
    }

    pub(crate) fn trace(&self) -> f64 {
        self.eif_var.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    None,
    L1,
    L2,
    EB,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::None, Method::L1, Method::L2, Method::EB];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::L1 => "l1",
            Method::L2 => "l2",
            Method::EB => "eb",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "unpenalized" => Ok(Method::None),
            "l1" => Ok(Method::L1),
            "l2" => Ok(Method::L2),
            "eb" => Ok(Method::EB),
            other => Err(Error::invalid(format!(
                "unknown penalization method `{other}` (expected l1, l2, eb or none)"
            ))),
        }
    }
}

/// Closed interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn centered(center: f64, half_width: f64) -> Self {
        Interval {
            lower: center - half_width,
            upper: center + half_width,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lower <= self.lower && self.upper <= other.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Warning {
    /// All estimates were zero; the `L1` search returned its capped upper end.
    DegenerateL1Cap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizedEstimate {
    pub method: Method,
    /// The unpenalized estimates the penalty was applied to.
    pub psi: Vec<f64>,
    pub psi_tilde: Vec<f64>,
    /// Chosen tuning parameter (zero for `EB` and `None`).
    pub lambda: f64,
    pub shrink_factor: Vec<f64>,
    pub ci_basic: Vec<Interval>,
    pub ci_shrunk: Vec<Interval>,
    pub alpha: f64,
    pub warnings: Vec<Warning>,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda = {lambda} must be finite and non-negative")))
    }
}

/// Assembles a [`PenalizedEstimate`] with both interval families.
pub(crate) fn assemble(
    est: &EstimateSet,
    method: Method,
    lambda: f64,
    psi_tilde: Vec<f64>,
    shrink_factor: Vec<f64>,
    alpha: f64,
) -> PenalizedEstimate {
    let q = normal::two_sided_critical(alpha);
    let mut ci_basic = Vec::with_capacity(est.dim());
    let mut ci_shrunk = Vec::with_capacity(est.dim());
    for d in 0..est.dim() {
        let half = q * est.se(d);
        ci_basic.push(Interval::centered(psi_tilde[d], half));
        ci_shrunk.push(Interval::centered(psi_tilde[d], shrink_factor[d] * half));
    }
    PenalizedEstimate {
        method,
        psi: est.psi.clone(),
        psi_tilde,
        lambda,
        shrink_factor,
        ci_basic,
        ci_shrunk,
        alpha,
        warnings: Vec::new(),
    }
}

/// The unpenalized estimate wrapped with its Wald intervals.
pub fn identity(est: &EstimateSet, alpha: f64) -> Result<PenalizedEstimate> {
    est.validate()?;
    check_alpha(alpha)?;
    Ok(assemble(
        est,
        Method::None,
        0.0,
        est.psi.clone(),
        vec![1.0; est.dim()],
        alpha,
    ))
}

/// Chooses the tuning parameter from the data and applies `method`.
pub fn penalize(est: &EstimateSet, method: Method, alpha: f64) -> Result<PenalizedEstimate> {
    penalize_with(est, method, alpha, &SearchConfig::default())
}

pub fn penalize_with(
    est: &EstimateSet,
    method: Method,
    alpha: f64,
    search: &SearchConfig,
) -> Result<PenalizedEstimate> {
    est.validate()?;
    check_alpha(alpha)?;
    match method {
        Method::None => identity(est, alpha),
        Method::L2 => {
            let lambda = l2_lambda_star(est)?;
            l2_shrink(est, lambda, alpha)
        }
        Method::L1 => {
            let found = l1_lambda_search(est, search)?;
            let mut out = l1_shrink(est, found.lambda, alpha)?;
            if found.degenerate {
                out.warnings.push(Warning::DegenerateL1Cap);
            }
            Ok(out)
        }
        Method::EB => eb_shrink(est, alpha),
    }
}
