//! Penalized post-processing of efficient nonparametric estimates.
//!
//! The crate turns a vector of asymptotically efficient estimates (with their
//! influence-function variances) into shrunken estimates using an `L2`, `L1`
//! or empirical-Bayes penalty whose tuning parameter is chosen from the data
//! to minimize an approximation of the joint mean-squared error. The tuning
//! parameter vanishes as the sample size grows, so the penalized estimates
//! keep the asymptotic behaviour of the originals.
//!
//! Modules:
//!
//! * [`penalty`]: shrinkage maps, tuning criteria, confidence intervals and
//!   influence-function calculus for penalized parameters.
//! * [`estimators`]: cross-fitted one-step estimators for three families of
//!   vector-valued parameters (linear association, group-specific treatment
//!   effects, indirectly standardized outcomes).
//! * [`learners`]: nuisance regressions (OLS, ridge, lasso, logistic).
//! * [`sim`]: data-generating processes and the replication driver used to
//!   study finite-sample behaviour.
//! * [`io`]: CSV interchange, run manifests and the simulation config format.

pub mod error;
pub mod estimators;
pub mod io;
pub mod learners;
pub mod normal;
pub mod penalty;
pub mod sim;

pub use error::{Error, Result};
pub use estimators::{Dataset, EifMatrix, FoldAssignment, OneStepOptions};
pub use penalty::{EstimateSet, Method, PenalizedEstimate, SearchConfig};
