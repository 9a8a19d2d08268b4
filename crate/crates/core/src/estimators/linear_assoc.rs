//! Non-parametric linear association `E[Cov(X_d, Y | X_{(-d)})]`.

use nalgebra::DMatrix;

use super::{finish, make_folds, pool, Dataset, EifMatrix, FoldTerms, OneStep, OneStepOptions};
use crate::error::{Error, Result};
use crate::learners::{append_column, expand, GramCache};

/// Cross-fitted one-step estimate of each covariate's linear association
/// with the outcome.
///
/// For every covariate `d`, `E[X_d | X_{(-d)}]` and `E[Y | X_{(-d)}]` are fit
/// out of fold with the outcome learner and the fold estimate is the mean of
/// the residual product. With `opts.scaled` each coordinate is divided by the
/// mean squared covariate residual, which puts it on the scale of a
/// regression coefficient.
pub fn onestep_linear_assoc(data: &Dataset, opts: &OneStepOptions) -> Result<OneStep> {
    opts.validate()?;
    let x = data.covariates();
    let y = data.outcome();
    let (n, p) = x.shape();
    if p == 0 {
        return Err(Error::invalid("linear association needs at least one covariate"));
    }
    if n < 5 * opts.folds {
        return Err(Error::InsufficientData(format!(
            "{n} rows is fewer than 5 per fold for {} folds",
            opts.folds
        )));
    }
    let learner = &opts.outcome_learner;
    let squares = learner.squared_terms;
    let design = expand(&x, squares);
    let q = design.ncols();
    let z = append_column(&design, y);
    let folds = make_folds(n, opts.folds, opts.seed, None)?;

    // residuals of X_d and Y on X_{(-d)}, evaluated out of fold
    let mut rx = DMatrix::zeros(n, p);
    let mut ry = DMatrix::zeros(n, p);
    let mut terms = Vec::with_capacity(opts.folds);
    let mut warnings = Vec::new();
    for k in 1..=opts.folds {
        let train = folds.rows_out(k);
        let test = folds.rows_in(k);
        let cache = GramCache::new(
            &z,
            &train,
            learner.cache_folds(),
            learner.seed.wrapping_add(k as u64),
        )?;
        let mut plug_in = vec![0.0; p];
        let mut correction = vec![0.0; p];
        for d in 0..p {
            let features: Vec<usize> = (0..q).filter(|&j| j != d && !(squares && j == p + d)).collect();
            let (pi, w1) = learner.fit_cached(&cache, &features, d)?;
            let (mu, w2) = learner.fit_cached(&cache, &features, q)?;
            warnings.extend(w1.into_iter().chain(w2));
            let products = |rows: &[usize]| -> Vec<(f64, f64)> {
                let px = pi.predict_rows(&z, rows, &features);
                let py = mu.predict_rows(&z, rows, &features);
                rows.iter()
                    .zip(px.iter().zip(&py))
                    .map(|(&i, (a, b))| (z[(i, d)] - a, y[i] - b))
                    .collect()
            };
            let fit_res = products(&train);
            plug_in[d] = fit_res.iter().map(|(a, b)| a * b).sum::<f64>() / train.len() as f64;
            let eval = products(&test);
            let mut s = 0.0;
            for (&i, (a, b)) in test.iter().zip(&eval) {
                rx[(i, d)] = *a;
                ry[(i, d)] = *b;
                s += a * b - plug_in[d];
            }
            correction[d] = s / test.len() as f64;
        }
        terms.push(FoldTerms {
            size: test.len(),
            plug_in,
            correction,
        });
    }

    let psi = pool(&terms, p);
    let mut eif = DMatrix::from_fn(n, p, |i, d| rx[(i, d)] * ry[(i, d)] - psi[d]);
    let mut scale = None;
    let mut estimate = psi.clone();
    if opts.scaled {
        let mut v = vec![0.0; p];
        for d in 0..p {
            let col = x.column(d);
            let mean = col.mean();
            let var_x = col.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64;
            v[d] = rx.column(d).iter().map(|r| r * r).sum::<f64>() / n as f64;
            if var_x == 0.0 || v[d] <= 1e-12 * var_x {
                return Err(Error::DegenerateScaling {
                    column: data.roles().covariates[d].clone(),
                });
            }
            let theta = psi[d] / v[d];
            estimate[d] = theta;
            for i in 0..n {
                let r = rx[(i, d)];
                eif[(i, d)] = (r * ry[(i, d)] - theta * r * r) / v[d];
            }
        }
        scale = Some(v);
    }
    let eif = EifMatrix {
        values: eif,
        centered: false,
    };
    finish(
        estimate,
        eif,
        data.roles().covariates.clone(),
        folds,
        terms,
        scale,
        warnings,
    )
}
