//! Equal-odds post-processing: per-group decision thresholds chosen on
//! validation predictions so every group's TPR/FPR pair lands as close as
//! possible to the top-ranked group's rates at the default threshold. The
//! search walks the grid {0.00, 0.01, ..., 1.00}; ties prefer the threshold
//! closest to 0.5 and then the lower one, so fitting is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PredictionSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    /// One decision threshold per group, indexed by group id.
    pub thresholds: Vec<f64>,
    pub flags: Vec<String>,
}

impl ThresholdPolicy {
    pub fn policy_json(&self) -> serde_json::Value {
        serde_json::json!({
            "thresholds": self.thresholds,
            "flags": self.flags,
        })
    }
}

const GRID_STEPS: usize = 100;

fn grid_value(i: usize) -> f64 {
    i as f64 / GRID_STEPS as f64
}

/// TPR and FPR of one group's validation slice at a given threshold;
/// a component is `None` when its denominator is empty.
#[derive(Clone, Copy)]
struct GroupSlice<'a> {
    positives: &'a [f64],
    negatives: &'a [f64],
}

impl GroupSlice<'_> {
    fn rates_at(&self, threshold: f64) -> (Option<f64>, Option<f64>) {
        let frac = |probs: &[f64]| {
            if probs.is_empty() {
                None
            } else {
                Some(probs.iter().filter(|&&p| p > threshold).count() as f64 / probs.len() as f64)
            }
        };
        (frac(self.positives), frac(self.negatives))
    }

    fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }
}

/// Distance between a group's rates at a candidate threshold and the
/// reference rates, summed over the components both sides define.
/// Returns `None` when no component is shared.
fn objective(
    slice: &GroupSlice,
    threshold: f64,
    reference: (Option<f64>, Option<f64>),
) -> Option<f64> {
    let (tpr, fpr) = slice.rates_at(threshold);
    let mut value = 0.0;
    let mut terms = 0;
    if let (Some(t), Some(rt)) = (tpr, reference.0) {
        value += (t - rt).abs();
        terms += 1;
    }
    if let (Some(f), Some(rf)) = (fpr, reference.1) {
        value += (f - rf).abs();
        terms += 1;
    }
    (terms > 0).then_some(value)
}

/// Fits per-group thresholds on validation predictions. The top-ranked
/// group keeps the default 0.5 and serves as the reference; every other
/// group's threshold minimizes its |ΔTPR| + |ΔFPR| against that reference.
/// A group absent from validation keeps 0.5 and is flagged.
pub fn eop_fit(val: &PredictionSet, n_groups: usize) -> Result<ThresholdPolicy> {
    if n_groups < 2 {
        return Err(Error::InsufficientGroups(
            "per-group thresholds need at least two groups".into(),
        ));
    }
    if let Some(&g) = val.group_of.iter().find(|&&g| g >= n_groups) {
        return Err(Error::MissingGroup(format!(
            "validation carries group id {g} but only {n_groups} groups exist"
        )));
    }

    // Partition validation probabilities by group and true label.
    let mut positives: Vec<Vec<f64>> = vec![Vec::new(); n_groups];
    let mut negatives: Vec<Vec<f64>> = vec![Vec::new(); n_groups];
    for i in 0..val.len() {
        let g = val.group_of[i];
        if val.y_true[i] == 1 {
            positives[g].push(val.y_prob[i]);
        } else {
            negatives[g].push(val.y_prob[i]);
        }
    }
    let slices: Vec<GroupSlice> = (0..n_groups)
        .map(|g| GroupSlice {
            positives: &positives[g],
            negatives: &negatives[g],
        })
        .collect();

    let mut flags = Vec::new();
    let mut thresholds = vec![0.5f64; n_groups];

    let reference = slices[0].rates_at(0.5);
    if slices[0].is_empty() {
        flags.push(
            "reference group 0 is absent from validation; all thresholds stay 0.5".into(),
        );
        return Ok(ThresholdPolicy { thresholds, flags });
    }

    for g in 1..n_groups {
        if slices[g].is_empty() {
            flags.push(format!(
                "group {g} is absent from validation; its threshold stays 0.5"
            ));
            continue;
        }
        // Tie-breaking works in grid units: |i - 50| measures distance to
        // 0.5 without float noise, and the lower index wins exact ties.
        let mut best: Option<(f64, usize, usize)> = None; // (objective, |i-50|, i)
        for i in 0..=GRID_STEPS {
            let t = grid_value(i);
            let Some(obj) = objective(&slices[g], t, reference) else {
                continue;
            };
            let candidate = (obj, i.abs_diff(GRID_STEPS / 2), i);
            let better = match &best {
                None => true,
                Some(current) => {
                    candidate.0 < current.0
                        || (candidate.0 == current.0 && candidate.1 < current.1)
                        || (candidate.0 == current.0
                            && candidate.1 == current.1
                            && candidate.2 < current.2)
                }
            };
            if better {
                best = Some(candidate);
            }
        }
        match best {
            Some((_, _, i)) => thresholds[g] = grid_value(i),
            None => flags.push(format!(
                "group {g} shares no defined rate with the reference; threshold stays 0.5"
            )),
        }
    }

    Ok(ThresholdPolicy { thresholds, flags })
}

/// Relabels predictions by each instance's group threshold. Probabilities
/// and everything else are carried over unchanged, so applying a policy
/// twice equals applying it once.
pub fn eop_apply(policy: &ThresholdPolicy, p: &PredictionSet) -> Result<PredictionSet> {
    if let Some(&g) = p.group_of.iter().find(|&&g| g >= policy.thresholds.len()) {
        return Err(Error::MissingGroup(format!(
            "instance carries group id {g} but the policy covers {} groups",
            policy.thresholds.len()
        )));
    }
    let y_pred = (0..p.len())
        .map(|i| u8::from(p.y_prob[i] > policy.thresholds[p.group_of[i]]))
        .collect();
    Ok(PredictionSet {
        y_true: p.y_true.clone(),
        y_pred,
        y_prob: p.y_prob.clone(),
        group_of: p.group_of.clone(),
        run_id: p.run_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{group_rates, PredictionSet};

    fn prediction_set(
        rows: &[(u8, f64, usize)], // (y_true, y_prob, group)
    ) -> PredictionSet {
        PredictionSet::new(
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| u8::from(r.1 > 0.5)).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn already_equalized_rates_keep_default_thresholds() {
        // Both groups: TPR = 1/2, FPR = 0 at threshold 0.5.
        let val = prediction_set(&[
            (1, 0.9, 0), (1, 0.3, 0), (0, 0.2, 0), (0, 0.1, 0),
            (1, 0.8, 1), (1, 0.4, 1), (0, 0.3, 1), (0, 0.2, 1),
        ]);
        let policy = eop_fit(&val, 2).unwrap();
        assert_eq!(policy.thresholds, vec![0.5, 0.5]);
        assert!(policy.flags.is_empty());
    }

    #[test]
    fn lowering_unprivileged_threshold_equalizes_exactly() {
        // Group 0 at 0.5: TPR = 1.0 (both positives above), FPR = 0.0.
        // Group 1 positives sit at 0.45/0.31, negatives at 0.10/0.05:
        // thresholds in [0.10, 0.31) give TPR = 1.0 and FPR = 0.0, so the
        // grid's zero-objective window is [0.10, 0.30] and 0.30 is its
        // point closest to 0.5.
        let val = prediction_set(&[
            (1, 0.9, 0), (1, 0.8, 0), (0, 0.2, 0), (0, 0.1, 0),
            (1, 0.45, 1), (1, 0.31, 1), (0, 0.10, 1), (0, 0.05, 1),
        ]);
        let policy = eop_fit(&val, 2).unwrap();
        assert_eq!(policy.thresholds, vec![0.5, 0.3]);

        // Post-hoc the gaps are exactly zero.
        let adjusted = eop_apply(&policy, &val).unwrap();
        let rates = group_rates(&adjusted, 2).unwrap();
        let p = rates.per_group[0];
        let u = rates.per_group[1];
        assert_eq!(p.tpr, u.tpr);
        assert_eq!(p.fpr, u.fpr);
    }

    #[test]
    fn fitted_policy_never_worsens_the_validation_objective() {
        let val = prediction_set(&[
            (1, 0.95, 0), (1, 0.7, 0), (1, 0.4, 0), (0, 0.6, 0), (0, 0.3, 0),
            (1, 0.55, 1), (1, 0.25, 1), (0, 0.45, 1), (0, 0.15, 1), (0, 0.35, 1),
        ]);
        let gap = |pred: &PredictionSet| {
            let r = group_rates(pred, 2).unwrap();
            let p = r.per_group[0];
            let u = r.per_group[1];
            (p.tpr.unwrap() - u.tpr.unwrap()).abs() + (p.fpr.unwrap() - u.fpr.unwrap()).abs()
        };
        let default_policy = ThresholdPolicy {
            thresholds: vec![0.5, 0.5],
            flags: vec![],
        };
        let fitted = eop_fit(&val, 2).unwrap();
        let before = gap(&eop_apply(&default_policy, &val).unwrap());
        let after = gap(&eop_apply(&fitted, &val).unwrap());
        assert!(after <= before, "fitted {after} vs default {before}");
    }

    #[test]
    fn group_missing_from_validation_keeps_default_and_flags() {
        let val = prediction_set(&[(1, 0.9, 0), (0, 0.2, 0), (1, 0.7, 0), (0, 0.4, 0)]);
        let policy = eop_fit(&val, 2).unwrap();
        assert_eq!(policy.thresholds[1], 0.5);
        assert_eq!(policy.flags.len(), 1);
        assert!(policy.flags[0].contains("group 1"));
    }

    #[test]
    fn apply_is_idempotent() {
        let val = prediction_set(&[
            (1, 0.9, 0), (0, 0.45, 0), (1, 0.55, 1), (0, 0.2, 1), (1, 0.35, 1),
        ]);
        let policy = ThresholdPolicy {
            thresholds: vec![0.5, 0.3],
            flags: vec![],
        };
        let once = eop_apply(&policy, &val).unwrap();
        let twice = eop_apply(&policy, &once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn apply_rejects_unknown_group() {
        let val = prediction_set(&[(1, 0.9, 0), (0, 0.2, 2)]);
        let policy = ThresholdPolicy {
            thresholds: vec![0.5, 0.5],
            flags: vec![],
        };
        assert!(matches!(
            eop_apply(&policy, &val),
            Err(Error::MissingGroup(_))
        ));
    }

    #[test]
    fn multi_group_fit_matches_each_group_to_the_reference() {
        // Group 0 (reference): TPR 0.5, FPR 0.0 at 0.5.
        // Group 2's probabilities are shifted low; a lower threshold
        // recovers the reference rates.
        let val = prediction_set(&[
            (1, 0.9, 0), (1, 0.3, 0), (0, 0.2, 0), (0, 0.4, 0),
            (1, 0.8, 1), (1, 0.35, 1), (0, 0.25, 1), (0, 0.15, 1),
            (1, 0.45, 2), (1, 0.10, 2), (0, 0.05, 2), (0, 0.02, 2),
        ]);
        let policy = eop_fit(&val, 3).unwrap();
        assert_eq!(policy.thresholds[0], 0.5);
        // Each fitted threshold reproduces the reference rates exactly here.
        let adjusted = eop_apply(&policy, &val).unwrap();
        let rates = group_rates(&adjusted, 3).unwrap();
        for g in 1..3 {
            assert_eq!(rates.per_group[g].tpr, rates.per_group[0].tpr, "group {g} tpr");
            assert_eq!(rates.per_group[g].fpr, rates.per_group[0].fpr, "group {g} fpr");
        }
    }
}
