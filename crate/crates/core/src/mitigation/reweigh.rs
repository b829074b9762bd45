//! Reweighing: pre-processing weights that make group membership and label
//! statistically independent in the weighted training distribution. Each
//! (group g, label l) cell gets weight P(g)P(l) / P(g,l), estimated from
//! empirical frequencies, so under-represented favorable cells are boosted
//! and over-represented ones damped.

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::data::groups::GroupAssignment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightPlan {
    /// Per-instance training weights, aligned with the input rows.
    pub weights: Vec<f64>,
    /// Cell weights indexed by group, `[weight(g, label 0), weight(g, label 1)]`.
    pub cell_weights: Vec<[f64; 2]>,
    pub flags: Vec<String>,
}

/// Computes the plan from raw group ids and labels.
pub fn reweigh_from_parts(
    group_of: &[usize],
    labels: &[u8],
    n_groups: usize,
) -> Result<WeightPlan> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptySample("cannot reweigh an empty set".into()));
    }
    if group_of.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{n} labels but {} group ids",
            group_of.len()
        )));
    }
    if let Some(&g) = group_of.iter().find(|&&g| g >= n_groups) {
        return Err(Error::MissingGroup(format!(
            "group id {g} out of range for {n_groups} groups"
        )));
    }

    let mut group_count = vec![0usize; n_groups];
    let mut label_count = [0usize; 2];
    let mut cell_count = vec![[0usize; 2]; n_groups];
    for i in 0..n {
        let g = group_of[i];
        let l = labels[i] as usize;
        group_count[g] += 1;
        label_count[l] += 1;
        cell_count[g][l] += 1;
    }

    let mut flags = Vec::new();
    let mut cell_weights = vec![[0.0f64; 2]; n_groups];
    for g in 0..n_groups {
        for l in 0..2 {
            if cell_count[g][l] == 0 {
                flags.push(format!(
                    "cell (group {g}, label {l}) is empty; its weight is 0"
                ));
                cell_weights[g][l] = 0.0;
            } else {
                cell_weights[g][l] = (group_count[g] * label_count[l]) as f64
                    / (n * cell_count[g][l]) as f64;
            }
        }
    }

    let weights = (0..n)
        .map(|i| cell_weights[group_of[i]][labels[i] as usize])
        .collect();
    Ok(WeightPlan {
        weights,
        cell_weights,
        flags,
    })
}

/// Reweighing for a dataset under a group assignment.
pub fn reweigh(train: &Dataset, groups: &GroupAssignment) -> Result<WeightPlan> {
    let ids = groups.ids_for(train)?;
    reweigh_from_parts(&ids, &train.labels, groups.len())
}

impl WeightPlan {
    pub fn policy_json(&self) -> serde_json::Value {
        serde_json::json!({
            "cell_weights": self.cell_weights,
            "flags": self.flags,
        })
    }
}
