use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

/// One demographic group: a combination of per-attribute privileged /
/// unprivileged sides, plus the share of favorable training labels used to
/// rank it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupInfo {
    /// Human-readable key, e.g. `sex=Male&race!=White`.
    pub key: String,
    /// Fraction of favorable labels among the group's training rows;
    /// `None` when the group never appears in training data.
    pub favored_rate: Option<f64>,
}

/// Ranked demographic groups for one task. Groups are the combinations of
/// dichotomized sensitive-attribute values observed anywhere in the full
/// data. With a single attribute the privileged side is always ranked
/// first; with several attributes groups are ordered by descending training
/// favored rate (ties broken by key, groups unseen in training last).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub groups: Vec<GroupInfo>,
    /// Group index per row of the full dataset the assignment was built on.
    pub assignments: Vec<usize>,
    pub flags: Vec<String>,
    /// Dichotomy mask -> group index, for mapping further datasets.
    mask_to_group: HashMap<u64, usize>,
    n_attributes: usize,
}

impl GroupAssignment {
    /// Number of groups.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Short labels for reports: `p`/`u` for the two-group case, else
    /// `group1..groupN` in rank order.
    pub fn report_labels(&self) -> Vec<String> {
        if self.groups.len() == 2 {
            vec!["p".into(), "u".into()]
        } else {
            (1..=self.groups.len()).map(|i| format!("group{i}")).collect()
        }
    }

    /// Group index for each row of `d`, which must use the same sensitive
    /// attributes and contain no combination outside the full data the
    /// assignment was built from.
    pub fn ids_for(&self, d: &Dataset) -> Result<Vec<usize>> {
        if d.schema.sensitive.len() != self.n_attributes {
            return Err(Error::Misaligned(format!(
                "assignment built for {} sensitive attributes, dataset has {}",
                self.n_attributes,
                d.schema.sensitive.len()
            )));
        }
        (0..d.len())
            .map(|row| {
                let mask = row_mask(d, row);
                self.mask_to_group.get(&mask).copied().ok_or_else(|| {
                    Error::MissingGroup(format!(
                        "row {row} belongs to a group combination absent from the assignment"
                    ))
                })
            })
            .collect()
    }
}

fn row_mask(d: &Dataset, row: usize) -> u64 {
    let mut mask = 0u64;
    for (bit, attr) in d.schema.sensitive.iter().enumerate() {
        if d.sensitive[bit][row] == attr.privileged {
            mask |= 1 << bit;
        }
    }
    mask
}

fn mask_key(d: &Dataset, mask: u64) -> String {
    d.schema
        .sensitive
        .iter()
        .enumerate()
        .map(|(bit, attr)| {
            if mask & (1 << bit) != 0 {
                format!("{}={}", attr.name, attr.privileged)
            } else {
                format!("{}!={}", attr.name, attr.privileged)
            }
        })
        .collect::<Vec<_>>()
        .join("&")
}

/// Builds the demographic groups for a task. `train` supplies the favorable
/// rates that order the groups; `full` determines which combinations exist
/// at all, so a combination confined to the test side is still represented
/// (unranked, flagged) rather than dropped.
pub fn assign_groups(train: &Dataset, full: &Dataset) -> Result<GroupAssignment> {
    if train.schema.sensitive != full.schema.sensitive {
        return Err(Error::Misaligned(
            "train and full data declare different sensitive attributes".into(),
        ));
    }
    let n_attr = full.schema.sensitive.len();
    if n_attr == 0 {
        return Err(Error::Schema("no sensitive attributes declared".into()));
    }
    if n_attr > 64 {
        return Err(Error::Schema(format!(
            "at most 64 sensitive attributes supported, got {n_attr}"
        )));
    }

    // Observed combinations and, from train, favorable counts.
    let mut observed: Vec<u64> = Vec::new();
    let mut seen: HashMap<u64, ()> = HashMap::new();
    for row in 0..full.len() {
        let mask = row_mask(full, row);
        if seen.insert(mask, ()).is_none() {
            observed.push(mask);
        }
    }
    let mut train_total: HashMap<u64, usize> = HashMap::new();
    let mut train_favored: HashMap<u64, usize> = HashMap::new();
    for row in 0..train.len() {
        let mask = row_mask(train, row);
        *train_total.entry(mask).or_insert(0) += 1;
        if train.labels[row] == 1 {
            *train_favored.entry(mask).or_insert(0) += 1;
        }
    }

    let mut flags = Vec::new();
    let mut entries: Vec<(u64, String, Option<f64>)> = observed
        .iter()
        .map(|&mask| {
            let key = mask_key(full, mask);
            let rate = train_total.get(&mask).map(|&total| {
                train_favored.get(&mask).copied().unwrap_or(0) as f64 / total as f64
            });
            (mask, key, rate)
        })
        .collect();
    for (_, key, rate) in &entries {
        if rate.is_none() {
            flags.push(format!(
                "group {key} never appears in training data; ranked last with no favored rate"
            ));
        }
    }

    if n_attr == 1 {
        // Privileged side first, matching the usual P/U convention.
        entries.sort_by(|a, b| {
            let a_priv = a.0 & 1 != 0;
            let b_priv = b.0 & 1 != 0;
            b_priv.cmp(&a_priv)
        });
    } else {
        entries.sort_by(|a, b| match (a.2, b.2) {
            (Some(x), Some(y)) => y
                .partial_cmp(&x)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.1.cmp(&b.1)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.1.cmp(&b.1),
        });
    }

    let mask_to_group: HashMap<u64, usize> = entries
        .iter()
        .enumerate()
        .map(|(idx, (mask, _, _))| (*mask, idx))
        .collect();
    let groups: Vec<GroupInfo> = entries
        .iter()
        .map(|(_, key, rate)| GroupInfo {
            key: key.clone(),
            favored_rate: *rate,
        })
        .collect();
    let assignments = (0..full.len())
        .map(|row| mask_to_group[&row_mask(full, row)])
        .collect();

    Ok(GroupAssignment {
        groups,
        assignments,
        flags,
        mask_to_group,
        n_attributes: n_attr,
    })
}
