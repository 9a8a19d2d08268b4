//! Per-group outcome means.

use crate::error::{Error, Result};

/// Means, empirical frequencies and counts of an outcome within groups `1..=D`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMeans {
    pub means: Vec<f64>,
    pub freqs: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GroupMeans {
    /// Mean for group `g` (1-based).
    pub fn mean(&self, g: usize) -> f64 {
        self.means[g - 1]
    }
}

fn kahan_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let y = x - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

/// Groups are labelled `1..=D`; `D` is the largest label unless given.
pub fn fit_group_mean(groups: &[usize], y: &[f64], n_groups: Option<usize>) -> Result<GroupMeans> {
    if groups.len() != y.len() {
        return Err(Error::invalid(format!(
            "{} group labels for {} outcomes",
            groups.len(),
            y.len()
        )));
    }
    if groups.is_empty() {
        return Err(Error::InsufficientData("no observations".to_string()));
    }
    if groups.contains(&0) {
        return Err(Error::invalid("group labels start at 1"));
    }
    let observed = *groups.iter().max().unwrap();
    let d = n_groups.unwrap_or(observed);
    if observed > d {
        return Err(Error::invalid(format!("group label {observed} exceeds {d} groups")));
    }
    let mut sums = vec![(0.0, 0.0); d];
    let mut counts = vec![0usize; d];
    for (&g, &v) in groups.iter().zip(y) {
        let (s, c) = &mut sums[g - 1];
        kahan_add(s, c, v);
        counts[g - 1] += 1;
    }
    if let Some(g) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCell(format!("group {} has no observations", g + 1)));
    }
    let n = groups.len() as f64;
    Ok(GroupMeans {
        means: sums.iter().zip(&counts).map(|((s, _), &c)| s / c as f64).collect(),
        freqs: counts.iter().map(|&c| c as f64 / n).collect(),
        counts,
    })
}
