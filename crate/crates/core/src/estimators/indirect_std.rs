//! Indirectly standardized provider outcomes and the centered standardized ratio.

use nalgebra::DMatrix;

use super::{finish, make_folds, pool, Dataset, EifMatrix, FoldTerms, OneStep, OneStepOptions};
use crate::error::{Error, Result};
use crate::penalty::EstimateSet;

/// Cross-fitted one-step estimate of `E[μ(X) | A = d]` for each provider `d`,
/// where `μ(X) = E[Y | X]` ignores the provider.
///
/// Provider propensities are one-vs-rest logistic fits normalized to sum to
/// one and truncated below at `opts.truncation`.
pub fn onestep_indirect_std(data: &Dataset, opts: &OneStepOptions) -> Result<OneStep> {
    opts.validate()?;
    let (prov, n_prov) = data.categorical_treatment()?;
    let x = data.covariates();
    let y = data.outcome();
    let n = data.n_rows();
    let k_folds = opts.folds;

    let mut counts = vec![0usize; n_prov];
    for &p in &prov {
        counts[p - 1] += 1;
    }
    if let Some(d) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Positivity(format!("provider {} has no rows", d + 1)));
    }
    if let Some(d) = counts.iter().position(|&c| c < k_folds) {
        return Err(Error::FoldStratification(format!(
            "provider {} has {} rows, fewer than {k_folds} folds",
            d + 1,
            counts[d]
        )));
    }
    let folds = make_folds(n, k_folds, opts.seed, Some(&prov))?;
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let p = x.ncols();
    let sub = |rows: &[usize]| DMatrix::from_fn(rows.len(), p, |r, j| x[(rows[r], j)]);

    // per row: μ̂(X) and normalized propensities, all out of fold
    let mut mu_hat = vec![0.0; n];
    let mut pi_hat = DMatrix::zeros(n, n_prov);
    let mut terms = Vec::with_capacity(k_folds);
    let mut warnings = Vec::new();
    for k in 1..=k_folds {
        let train = folds.rows_out(k);
        let test = folds.rows_in(k);
        let xt = sub(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let mu = opts
            .outcome_learner
            .clone()
            .with_seed(opts.outcome_learner.seed.wrapping_add(k as u64))
            .fit(&xt, &yt)?;
        warnings.extend(mu.warnings.iter().cloned());
        let xs = sub(&test);
        let mu_test = mu.predict(&xs)?;
        let mu_train = mu.predict(&xt)?;

        let raw = if n_prov == 1 {
            DMatrix::from_element(test.len(), 1, 1.0)
        } else {
            let mut raw = DMatrix::zeros(test.len(), n_prov);
            for d in 1..=n_prov {
                let target: Vec<f64> = train.iter().map(|&i| f64::from(prov[i] == d)).collect();
                let fit = opts
                    .propensity_learner
                    .clone()
                    .with_seed(opts.propensity_learner.seed.wrapping_add((d * k_folds + k) as u64))
                    .fit(&xt, &target)?;
                warnings.extend(fit.warnings.iter().cloned());
                raw.set_column(d - 1, &fit.predict(&xs)?);
            }
            raw
        };

        let mut plug_in = vec![0.0; n_prov];
        let mut train_counts = vec![0usize; n_prov];
        for (r, &i) in train.iter().enumerate() {
            plug_in[prov[i] - 1] += mu_train[r];
            train_counts[prov[i] - 1] += 1;
        }
        for (v, c) in plug_in.iter_mut().zip(&train_counts) {
            *v /= *c as f64;
        }
        let mut correction = vec![0.0; n_prov];
        for (r, &i) in test.iter().enumerate() {
            let total: f64 = raw.row(r).sum();
            mu_hat[i] = mu_test[r];
            for d in 0..n_prov {
                let pi = (raw[(r, d)] / total).clamp(opts.truncation, 1.0);
                pi_hat[(i, d)] = pi;
                let own = if prov[i] == d + 1 { mu_test[r] - plug_in[d] } else { 0.0 };
                correction[d] += (pi * (y[i] - mu_test[r]) + own) / freq[d];
            }
        }
        for c in correction.iter_mut() {
            *c /= test.len() as f64;
        }
        terms.push(FoldTerms {
            size: test.len(),
            plug_in,
            correction,
        });
    }
    let psi = pool(&terms, n_prov);
    let values = DMatrix::from_fn(n, n_prov, |i, d| {
        let own = if prov[i] == d + 1 { mu_hat[i] - psi[d] } else { 0.0 };
        (pi_hat[(i, d)] * (y[i] - mu_hat[i]) + own) / freq[d]
    });
    let eif = EifMatrix {
        values,
        centered: false,
    };
    let name = data.roles().treatment.clone().unwrap_or_default();
    let labels = (1..=n_prov).map(|d| format!("{name}_{d}")).collect();
    finish(psi, eif, labels, folds, terms, None, warnings)
}

/// Centered standardized ratio `psi_d / observed_mean_d - 1`, with variances
/// scaled by `1 / observed_mean_d²` (the observed means are treated as known).
pub fn srr(est: &EstimateSet, observed_mean: &[f64]) -> Result<EstimateSet> {
    if observed_mean.len() != est.dim() {
        return Err(Error::invalid(format!(
            "{} observed means for {} providers",
            observed_mean.len(),
            est.dim()
        )));
    }
    if let Some(d) = observed_mean.iter().position(|m| *m == 0.0) {
        return Err(Error::ZeroDenominator {
            provider: est.label(d),
        });
    }
    let psi = est.psi.iter().zip(observed_mean).map(|(p, m)| p / m - 1.0).collect();
    let eif_var = est.eif_var.iter().zip(observed_mean).map(|(v, m)| v / (m * m)).collect();
    let out = EstimateSet::new(psi, eif_var, est.n)?;
    match &est.labels {
        Some(l) => out.with_labels(l.clone()),
        None => Ok(out),
    }
}
