//! Group-specific average treatment effects.

use nalgebra::DMatrix;

use super::{finish, make_folds, pool, Dataset, EifMatrix, FoldTerms, OneStep, OneStepOptions};
use crate::error::{Error, Result};
use crate::learners::{expand, NuisanceFit};

/// Outcome regression `(group, treatment, covariates) -> E[Y | G, A, X]`.
pub type OutcomeFn<'a> = dyn Fn(usize, f64, &[f64]) -> f64 + Sync + 'a;
/// Propensity `(group, covariates) -> P(A = 1 | G, X)`.
pub type PropensityFn<'a> = dyn Fn(usize, &[f64]) -> f64 + Sync + 'a;

/// Known nuisance functions that replace the fitted ones.
#[derive(Clone, Copy, Default)]
pub struct GroupAteOverrides<'a> {
    pub outcome: Option<&'a OutcomeFn<'a>>,
    pub propensity: Option<&'a PropensityFn<'a>>,
}

/// Cross-fitted one-step estimate of `E[μ(1,d,X) - μ(0,d,X) | G = d]` for
/// every group `d`, with nuisances fit separately within each group.
pub fn onestep_group_ate(data: &Dataset, opts: &OneStepOptions) -> Result<OneStep> {
    onestep_group_ate_with(data, opts, GroupAteOverrides::default())
}

enum Outcome<'a> {
    Fitted(NuisanceFit),
    Known(&'a OutcomeFn<'a>),
}

enum Propensity<'a> {
    Fitted(NuisanceFit),
    Known(&'a PropensityFn<'a>),
}

pub fn onestep_group_ate_with(
    data: &Dataset,
    opts: &OneStepOptions,
    overrides: GroupAteOverrides,
) -> Result<OneStep> {
    opts.validate()?;
    let a = data.binary_treatment()?;
    let (g, n_groups) = data.groups()?;
    let x = data.covariates();
    let y = data.outcome();
    let n = data.n_rows();
    let k_folds = opts.folds;

    let mut cells = vec![[0usize; 2]; n_groups];
    for (gi, ai) in g.iter().zip(a) {
        cells[gi - 1][*ai as usize] += 1;
    }
    for (d, c) in cells.iter().enumerate() {
        for (arm, &count) in c.iter().enumerate() {
            if count == 0 {
                return Err(Error::Positivity(format!(
                    "group {} has no rows with treatment = {arm}",
                    d + 1
                )));
            }
        }
    }
    for (d, c) in cells.iter().enumerate() {
        if c[0] + c[1] < k_folds {
            return Err(Error::FoldStratification(format!(
                "group {} has {} rows, fewer than {k_folds} folds",
                d + 1,
                c[0] + c[1]
            )));
        }
        for (arm, &count) in c.iter().enumerate() {
            if count < k_folds {
                return Err(Error::FoldStratification(format!(
                    "group {}, treatment = {arm} has {count} rows, fewer than {k_folds} folds",
                    d + 1
                )));
            }
        }
    }
    let strata: Vec<usize> = g.iter().zip(a).map(|(gi, ai)| 2 * (gi - 1) + *ai as usize).collect();
    let folds = make_folds(n, k_folds, opts.seed, Some(&strata))?;
    let freq: Vec<f64> = cells.iter().map(|c| (c[0] + c[1]) as f64 / n as f64).collect();

    // outcome design: treatment followed by the (expanded) covariates
    let outcome_cfg = {
        let mut c = opts.outcome_learner.clone();
        c.squared_terms = false;
        c
    };
    let xo = expand(&x, opts.outcome_learner.squared_terms);
    let po = xo.ncols();
    let design = DMatrix::from_fn(n, po + 1, |i, j| if j == 0 { a[i] } else { xo[(i, j - 1)] });
    let px = x.ncols();
    let row_of = |m: &DMatrix<f64>, i: usize| -> Vec<f64> { m.row(i).iter().copied().collect() };

    let mut plug = vec![vec![0.0; n_groups]; k_folds];
    let mut corr = vec![vec![0.0; n_groups]; k_folds];
    let mut aug = vec![0.0; n];
    let mut warnings = Vec::new();
    let by_group: Vec<Vec<usize>> = (1..=n_groups)
        .map(|d| (0..n).filter(|&i| g[i] == d).collect())
        .collect();
    for (di, rows) in by_group.iter().enumerate() {
        let d = di + 1;
        for k in 1..=k_folds {
            let (train, test): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| folds.fold_of[i] != k);
            let outcome = match overrides.outcome {
                Some(f) => Outcome::Known(f),
                None => {
                    let w = DMatrix::from_fn(train.len(), po + 1, |r, j| design[(train[r], j)]);
                    let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                    let fit = outcome_cfg
                        .clone()
                        .with_seed(outcome_cfg.seed.wrapping_add((d * k_folds + k) as u64))
                        .fit(&w, &yt)?;
                    warnings.extend(fit.warnings.iter().cloned());
                    Outcome::Fitted(fit)
                }
            };
            let propensity = match overrides.propensity {
                Some(f) => Propensity::Known(f),
                None => {
                    let xt = DMatrix::from_fn(train.len(), px, |r, j| x[(train[r], j)]);
                    let at: Vec<f64> = train.iter().map(|&i| a[i]).collect();
                    let fit = opts
                        .propensity_learner
                        .clone()
                        .with_seed(opts.propensity_learner.seed.wrapping_add((d * k_folds + k) as u64))
                        .fit(&xt, &at)
                        .map_err(|e| match e {
                            Error::Positivity(_) => Error::Positivity(format!(
                                "group {d}: training fold {k} has a single treatment arm"
                            )),
                            other => other,
                        })?;
                    warnings.extend(fit.warnings.iter().cloned());
                    Propensity::Fitted(fit)
                }
            };
            let mu = |i: usize, arm: f64| -> f64 {
                match &outcome {
                    Outcome::Fitted(f) => {
                        let mut r = row_of(&design, i);
                        r[0] = arm;
                        f.predict_row(&r)
                    }
                    Outcome::Known(f) => f(d, arm, &row_of(&x, i)),
                }
            };
            let pi = |i: usize| -> f64 {
                let p = match &propensity {
                    Propensity::Fitted(f) => f.predict_row(&row_of(&x, i)),
                    Propensity::Known(f) => f(d, &row_of(&x, i)),
                };
                p.clamp(opts.truncation, 1.0 - opts.truncation)
            };
            let plug_in = train.iter().map(|&i| mu(i, 1.0) - mu(i, 0.0)).sum::<f64>() / train.len() as f64;
            let mut s = 0.0;
            for &i in &test {
                let (m1, m0) = (mu(i, 1.0), mu(i, 0.0));
                let p1 = pi(i);
                let value = if a[i] == 1.0 {
                    (y[i] - m1) / p1 + m1 - m0
                } else {
                    -(y[i] - m0) / (1.0 - p1) + m1 - m0
                };
                aug[i] = value;
                s += (value - plug_in) / freq[di];
            }
            plug[k - 1][di] = plug_in;
            corr[k - 1][di] = s / folds.rows_in(k).len() as f64;
        }
    }
    let sizes = folds.sizes();
    let terms: Vec<FoldTerms> = (0..k_folds)
        .map(|k| FoldTerms {
            size: sizes[k],
            plug_in: plug[k].clone(),
            correction: corr[k].clone(),
        })
        .collect();
    let psi = pool(&terms, n_groups);

    let mut values = DMatrix::zeros(n, n_groups);
    for (di, rows) in by_group.iter().enumerate() {
        let mean = rows.iter().map(|&i| aug[i] - psi[di]).sum::<f64>() / rows.len() as f64;
        for &i in rows {
            values[(i, di)] = (aug[i] - psi[di] - mean) / freq[di];
        }
    }
    let eif = EifMatrix {
        values,
        centered: true,
    };
    let group_name = data.roles().group.clone().unwrap_or_default();
    let labels = (1..=n_groups).map(|d| format!("{group_name}_{d}")).collect();
    finish(psi, eif, labels, folds, terms, None, warnings)
}
