//! Counterfactual ensembling. A second model is trained on a copy of the
//! fit data whose sensitive values are cycled to the next observed value
//! (so each instance carries its counterfactual group membership), and the
//! final probability blends the factual and counterfactual models:
//! p = lambda * p_f + (1 - lambda) * p_cf. The mixing weight comes from an
//! internal held-out slice: the grid value {0, 0.1, ..., 1} with the
//! smallest selection-rate gap among those that keep accuracy within two
//! points of the factual model.
//!
//! Both models share the encoder fitted on the factual data and are
//! evaluated on the same (unflipped) encoded instance; since the flip is a
//! permutation of categorical levels, the counterfactual model's score of a
//! factual instance equals a factual model's score of the flipped instance.

use std::collections::BTreeSet;

use crate::data::dataset::{ColumnData, Dataset};
use crate::data::encode::FeatureEncoder;
use crate::data::groups::GroupAssignment;
use crate::data::split::{split_dataset, SplitConfig};
use crate::error::Result;
use crate::metrics::{group_rates, multi_fairness, PredictionSet};
use crate::model::{fit_logistic, Hyper, LogisticModel};

/// Mixing-weight grid: lambda = i / LAMBDA_GRID_STEPS for i in 0..=steps.
pub const LAMBDA_GRID_STEPS: usize = 10;
/// How much validation accuracy a candidate may give up relative to the
/// factual model and still be considered.
pub const ACCURACY_SLACK: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub encoder: FeatureEncoder,
    pub factual: LogisticModel,
    pub counterfactual: LogisticModel,
    pub lambda: f64,
    pub seed: u64,
    pub flags: Vec<String>,
}

impl EnsembleModel {
    pub fn predict_proba(&self, d: &Dataset) -> Result<Vec<f64>> {
        let x = self.encoder.encode(d)?;
        let p_f = self.factual.predict_proba(&x)?;
        let p_cf = self.counterfactual.predict_proba(&x)?;
        Ok(p_f
            .iter()
            .zip(&p_cf)
            .map(|(&f, &c)| self.lambda * f + (1.0 - self.lambda) * c)
            .collect())
    }

    pub fn policy_json(&self) -> serde_json::Value {
        serde_json::json!({
            "lambda": self.lambda,
            "seed": self.seed,
            "flags": self.flags,
        })
    }
}

fn cycle_strings(values: &mut [String]) {
    let levels: Vec<String> = values
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if levels.len() < 2 {
        return;
    }
    for v in values.iter_mut() {
        let i = levels.binary_search(v).expect("observed value");
        *v = levels[(i + 1) % levels.len()].clone();
    }
}

fn cycle_numbers(values: &mut [f64]) {
    let mut levels: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    levels.dedup();
    if levels.len() < 2 {
        return;
    }
    for v in values.iter_mut() {
        if let Ok(i) = levels.binary_search_by(|x| x.partial_cmp(v).expect("finite values")) {
            *v = levels[(i + 1) % levels.len()];
        }
    }
}

/// Returns a copy of the dataset where every sensitive value is replaced by
/// the next observed value in sorted order (wrapping), so binary attributes
/// are swapped and k-valued ones are cycled. Feature columns that share a
/// sensitive attribute's name are cycled with the same rule so the model's
/// view stays consistent with the group columns. Labels and all other
/// features are untouched.
pub fn counterfactual_flip(d: &Dataset) -> Dataset {
    let mut out = d.clone();
    for col in out.sensitive.iter_mut() {
        cycle_strings(col);
    }
    let sensitive_names: BTreeSet<&str> = d
        .schema
        .sensitive
        .iter()
        .map(|s| s.name.as_str())
        .collect();
    for (f, spec) in d.schema.features.iter().enumerate() {
        if !sensitive_names.contains(spec.name.as_str()) {
            continue;
        }
        match &mut out.features[f] {
            ColumnData::Categorical(vals) => cycle_strings(vals),
            ColumnData::Numeric(vals) => cycle_numbers(vals),
        }
    }
    out
}

/// Fits the factual and counterfactual models on an internal 80% slice and
/// picks the mixing weight on the remaining 20%: smallest selection-rate
/// spread subject to accuracy >= factual accuracy - 0.02, ties broken
/// toward 0.5 and then toward the smaller weight. When the held-out slice
/// cannot support a selection-rate spread (fewer than two groups present),
/// the weight stays at 1 and the condition is flagged.
pub fn ensemble_fit(
    train: &Dataset,
    groups: &GroupAssignment,
    hyper: &Hyper,
    seed: u64,
) -> Result<EnsembleModel> {
    let (fit_ds, val_ds) = split_dataset(
        train,
        &SplitConfig {
            train_fraction: 0.8,
            seed,
        },
    )?;
    let encoder = FeatureEncoder::fit(&fit_ds)?;
    let x_fit = encoder.encode(&fit_ds)?;
    let ones = vec![1.0; fit_ds.len()];
    let factual = fit_logistic(&x_fit, &fit_ds.labels, &ones, hyper, seed)?;
    let flipped = counterfactual_flip(&fit_ds);
    let x_cf = encoder.encode(&flipped)?;
    let counterfactual = fit_logistic(&x_cf, &flipped.labels, &ones, hyper, seed)?;

    let mut flags: Vec<String> = Vec::new();
    for f in factual.flags.iter().chain(&counterfactual.flags) {
        if !flags.contains(f) {
            flags.push(f.clone());
        }
    }

    let x_val = encoder.encode(&val_ds)?;
    let p_f = factual.predict_proba(&x_val)?;
    let p_cf = counterfactual.predict_proba(&x_val)?;
    let val_ids = groups.ids_for(&val_ds)?;

    let mut present = vec![false; groups.len()];
    for &g in &val_ids {
        present[g] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        flags.push(
            "held-out slice lacks two groups; mixing weight fixed at 1 (factual model only)"
                .into(),
        );
        return Ok(EnsembleModel {
            encoder,
            factual,
            counterfactual,
            lambda: 1.0,
            seed,
            flags,
        });
    }

    let accuracy = |y_pred: &[u8]| -> f64 {
        let hits = y_pred
            .iter()
            .zip(&val_ds.labels)
            .filter(|(p, t)| p == t)
            .count();
        hits as f64 / val_ds.len() as f64
    };
    let factual_acc = accuracy(&p_f.iter().map(|&p| u8::from(p > 0.5)).collect::<Vec<_>>());

    // (spread, grid distance from the 0.5 index, grid index); lexicographic
    // minimum implements "smallest gap, then closest to 0.5, then lower".
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..=LAMBDA_GRID_STEPS {
        let lambda = i as f64 / LAMBDA_GRID_STEPS as f64;
        let blended: Vec<f64> = p_f
            .iter()
            .zip(&p_cf)
            .map(|(&f, &c)| lambda * f + (1.0 - lambda) * c)
            .collect();
        let y_pred: Vec<u8> = blended.iter().map(|&p| u8::from(p > 0.5)).collect();
        if accuracy(&y_pred) < factual_acc - ACCURACY_SLACK - 1e-12 {
            continue;
        }
        let ps = PredictionSet::new(
            val_ds.labels.clone(),
            y_pred,
            blended,
            val_ids.clone(),
            0,
        )?;
        let rates = group_rates(&ps, groups.len())?;
        let Some(spd) = multi_fairness(&rates)?.spd else {
            continue;
        };
        let candidate = (spd, i.abs_diff(LAMBDA_GRID_STEPS / 2), i);
        let better = match &best {
            None => true,
            Some(b) => {
                candidate.0 < b.0 || (candidate.0 == b.0 && (candidate.1, candidate.2) < (b.1, b.2))
            }
        };
        if better {
            best = Some(candidate);
        }
    }

    let lambda = match best {
        Some((_, _, i)) => i as f64 / LAMBDA_GRID_STEPS as f64,
        None => {
            flags.push(
                "no mixing weight satisfied the accuracy bound with a defined selection-rate \
                 spread; weight fixed at 1 (factual model only)"
                    .into(),
            );
            1.0
        }
    };
    Ok(EnsembleModel {
        encoder,
        factual,
        counterfactual,
        lambda,
        seed,
        flags,
    })
}

/// Evaluates the ensemble on a dataset, thresholding the blended
/// probability at 0.5.
pub fn ensemble_predict(
    m: &EnsembleModel,
    d: &Dataset,
    groups: &GroupAssignment,
    run_id: usize,
) -> Result<PredictionSet> {
    let probs = m.predict_proba(d)?;
    let ids = groups.ids_for(d)?;
    let y_pred = probs.iter().map(|&p| u8::from(p > 0.5)).collect();
    PredictionSet::new(d.labels.clone(), y_pred, probs, ids, run_id)
}
