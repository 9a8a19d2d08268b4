use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold membership (`1..=k`) for each row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    /// Row indices belonging to fold `fold` (1-based).
    pub fn rows_in(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Row indices outside fold `fold`.
    pub fn rows_out(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold_of {
            s[f - 1] += 1;
        }
        s
    }
}

/// Random fold assignment, balanced within each stratum and overall.
///
/// Rows of each stratum are shuffled and dealt round-robin; the dealing
/// position carries over between strata so overall fold sizes also differ
/// by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64, strata: Option<&[usize]>) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::FoldStratification(format!(
            "{n} rows cannot fill {k} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<(usize, Vec<usize>)> = match strata {
        None => vec![(0, (0..n).collect())],
        Some(s) => {
            if s.len() != n {
                return Err(Error::invalid(format!("{} strata labels for {n} rows", s.len())));
            }
            let mut labels: Vec<usize> = s.to_vec();
            labels.sort_unstable();
            labels.dedup();
            labels
                .into_iter()
                .map(|l| (l, (0..n).filter(|&i| s[i] == l).collect()))
                .collect()
        }
    };
    let mut fold_of = vec![0; n];
    let mut pos = 0usize;
    for (label, rows) in groups.iter_mut() {
        if rows.len() < k {
            return Err(Error::FoldStratification(format!(
                "stratum {label} has {} rows, fewer than {k} folds",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for &i in rows.iter() {
            fold_of[i] = pos % k + 1;
            pos += 1;
        }
    }
    Ok(FoldAssignment { fold_of, k, seed })
}
