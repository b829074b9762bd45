//! Selective application: given the base model's predictions and a mitigated
//! set over the same rows, rows whose group is in scope take the mitigated
//! outcome and every other row keeps the base outcome bit-for-bit. This lets
//! a mitigation aimed at specific disadvantaged groups leave the rest of the
//! population untouched.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::metrics::PredictionSet;

/// Which group ids receive the mitigated predictions. Must name at least
/// one group, and only known ones.
#[derive(Debug, Clone)]
pub struct SelectiveScope {
    pub target_groups: BTreeSet<usize>,
}

impl SelectiveScope {
    pub fn new<I: IntoIterator<Item = usize>>(groups: I) -> Self {
        Self {
            target_groups: groups.into_iter().collect(),
        }
    }

    /// The bottom half of a ranked group list (ids n/2..n), the default
    /// scope when mitigating the least-favored groups of a ranking.
    pub fn bottom_half(n_groups: usize) -> Self {
        Self::new(n_groups / 2..n_groups)
    }
}

/// Merges two prediction sets over the same rows: in-scope groups take the
/// mitigated predictions, all other rows keep the base predictions exactly.
/// `n_groups` is the size of the group assignment both sets were built
/// against; the scope must be a non-empty subset of those ids.
pub fn selective_apply(
    base: &PredictionSet,
    mitigated: &PredictionSet,
    n_groups: usize,
    scope: &SelectiveScope,
) -> Result<PredictionSet> {
    if scope.target_groups.is_empty() {
        return Err(Error::Config(
            "selective scope must name at least one group".into(),
        ));
    }
    if let Some(&g) = scope.target_groups.iter().find(|&&g| g >= n_groups) {
        return Err(Error::Config(format!(
            "selective scope names group {g} but only {n_groups} groups exist"
        )));
    }
    if base.len() != mitigated.len() {
        return Err(Error::Misaligned(format!(
            "base has {} rows, mitigated has {}",
            base.len(),
            mitigated.len()
        )));
    }
    if base.y_true != mitigated.y_true || base.group_of != mitigated.group_of {
        return Err(Error::Misaligned(
            "base and mitigated predictions describe different rows".into(),
        ));
    }
    let mut y_pred = Vec::with_capacity(base.len());
    let mut probs = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        if scope.target_groups.contains(&base.group_of[i]) {
            y_pred.push(mitigated.y_pred[i]);
            probs.push(mitigated.y_prob[i]);
        } else {
            y_pred.push(base.y_pred[i]);
            probs.push(base.y_prob[i]);
        }
    }
    PredictionSet::new(
        base.y_true.clone(),
        y_pred,
        probs,
        base.group_of.clone(),
        base.run_id,
    )
}
