//! A deliberately simple post-processing baseline for two-group tasks: hold
//! out 20% of the training data, measure the privileged group's selection
//! rate x there, and pick the unprivileged threshold that selects the same
//! fraction — the k-th largest unprivileged validation probability with
//! k = round(x * |U_val|). Privileged instances keep the model's default
//! 0.5 decisions; unprivileged instances are selected at probability >=
//! threshold, or not at all when k = 0.

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::data::encode::FeatureEncoder;
use crate::data::groups::GroupAssignment;
use crate::data::split::{split_dataset, SplitConfig};
use crate::error::{Error, Result};
use crate::metrics::PredictionSet;
use crate::mitigation::Pipeline;
use crate::model::{fit_logistic, Hyper};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NaiveBasePolicy {
    /// Selection threshold for the unprivileged group; `None` means the
    /// target count was zero and no unprivileged instance is selected.
    pub threshold: Option<f64>,
    /// The privileged validation selection rate the policy mirrors.
    pub privileged_sr: f64,
    /// Number of unprivileged validation instances the threshold selects.
    pub k: usize,
    pub seed: u64,
    pub flags: Vec<String>,
}

impl NaiveBasePolicy {
    pub fn policy_json(&self) -> serde_json::Value {
        serde_json::json!({
            "threshold": self.threshold,
            "privileged_sr": self.privileged_sr,
            "k": self.k,
            "seed": self.seed,
            "flags": self.flags,
        })
    }
}

/// The model fitted on the 80% slice together with the derived policy.
#[derive(Debug, Clone)]
pub struct NaiveBaseFit {
    pub pipeline: Pipeline,
    pub policy: NaiveBasePolicy,
}

/// Core selection rule, separated for direct testing: the threshold that
/// picks round(x * n) of the given probabilities, or `None` for zero.
pub fn select_threshold(x: f64, unprivileged_probs: &[f64]) -> (Option<f64>, usize) {
    let k = (x * unprivileged_probs.len() as f64).round() as usize;
    if k == 0 {
        return (None, 0);
    }
    let mut sorted = unprivileged_probs.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("no NaN probabilities"));
    (Some(sorted[k - 1]), k)
}

/// Fits the naive policy on training data: an internal seeded 80/20 split,
/// a model on the 80%, and the threshold from the 20%. Defined for
/// two-group (single-attribute) tasks; both groups must appear in the
/// validation slice.
pub fn naivebase_fit(
    train: &Dataset,
    groups: &GroupAssignment,
    hyper: &Hyper,
    seed: u64,
) -> Result<NaiveBaseFit> {
    if groups.len() != 2 {
        return Err(Error::InsufficientGroups(format!(
            "this policy is defined for the two-group dichotomy, got {} groups",
            groups.len()
        )));
    }
    let (fit_ds, val_ds) = split_dataset(
        train,
        &SplitConfig {
            train_fraction: 0.8,
            seed,
        },
    )?;
    let encoder = FeatureEncoder::fit(&fit_ds)?;
    let x_fit = encoder.encode(&fit_ds)?;
    let model = fit_logistic(
        &x_fit,
        &fit_ds.labels,
        &vec![1.0; fit_ds.len()],
        hyper,
        seed,
    )?;
    let pipeline = Pipeline { encoder, model };

    let val_ids = groups.ids_for(&val_ds)?;
    let val_probs = pipeline.predict_proba(&val_ds)?;
    let privileged: Vec<f64> = val_probs
        .iter()
        .zip(&val_ids)
        .filter(|(_, &g)| g == 0)
        .map(|(&p, _)| p)
        .collect();
    let unprivileged: Vec<f64> = val_probs
        .iter()
        .zip(&val_ids)
        .filter(|(_, &g)| g == 1)
        .map(|(&p, _)| p)
        .collect();
    if privileged.is_empty() {
        return Err(Error::MissingGroup(
            "privileged group absent from the internal validation slice".into(),
        ));
    }
    if unprivileged.is_empty() {
        return Err(Error::MissingGroup(
            "unprivileged group absent from the internal validation slice".into(),
        ));
    }

    let x = privileged.iter().filter(|&&p| p > 0.5).count() as f64 / privileged.len() as f64;
    let (threshold, k) = select_threshold(x, &unprivileged);
    let mut flags = pipeline.model.flags.clone();
    if threshold.is_none() {
        flags.push("privileged validation selection rate rounds to zero; no unprivileged instance will be selected".into());
    }
    Ok(NaiveBaseFit {
        pipeline,
        policy: NaiveBasePolicy {
            threshold,
            privileged_sr: x,
            k,
            seed,
            flags,
        },
    })
}

/// Applies a fitted policy: privileged instances keep the model's default
/// decisions, unprivileged instances are selected at probability >= the
/// policy threshold (or never, for the select-none policy).
pub fn naivebase_apply(
    fit: &NaiveBaseFit,
    d: &Dataset,
    groups: &GroupAssignment,
    run_id: usize,
) -> Result<PredictionSet> {
    if groups.len() != 2 {
        return Err(Error::InsufficientGroups(
            "naive policy application needs the two-group dichotomy".into(),
        ));
    }
    let ids = groups.ids_for(d)?;
    let probs = fit.pipeline.predict_proba(d)?;
    let y_pred = probs
        .iter()
        .zip(&ids)
        .map(|(&p, &g)| {
            if g == 0 {
                u8::from(p > 0.5)
            } else {
                match fit.policy.threshold {
                    Some(t) => u8::from(p >= t),
                    None => 0,
                }
            }
        })
        .collect();
    PredictionSet::new(d.labels.clone(), y_pred, probs, ids, run_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::load_dataset_from_reader;
    use crate::data::groups::assign_groups;
    use crate::data::schema::{DatasetSchema, FeatureColumn, FeatureKind, SensitiveAttribute};
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn threshold_is_kth_largest_probability() {
        let (t, k) = select_threshold(0.5, &[0.9, 0.7, 0.4, 0.1]);
        assert_eq!(k, 2);
        assert_eq!(t, Some(0.7));
    }

    #[test]
    fn zero_target_yields_select_none() {
        let (t, k) = select_threshold(0.05, &[0.9, 0.7, 0.4]);
        assert_eq!(k, 0);
        assert_eq!(t, None);
    }

    #[test]
    fn full_rate_selects_everything() {
        let (t, k) = select_threshold(1.0, &[0.9, 0.7, 0.4]);
        assert_eq!(k, 3);
        assert_eq!(t, Some(0.4));
    }

    #[test]
    fn selection_rate_matches_target_within_one_instance() {
        // Applying the >= rule to the probabilities the threshold came from
        // selects exactly k of them when values are distinct.
        let probs = [0.91, 0.83, 0.77, 0.64, 0.52, 0.41, 0.33, 0.28, 0.15, 0.09];
        for x in [0.0, 0.18, 0.33, 0.5, 0.74, 1.0] {
            let (t, k) = select_threshold(x, &probs);
            let selected = match t {
                Some(t) => probs.iter().filter(|&&p| p >= t).count(),
                None => 0,
            };
            assert_eq!(selected, k, "x = {x}");
            let achieved = selected as f64 / probs.len() as f64;
            assert!(
                (achieved - x).abs() <= 1.0 / probs.len() as f64,
                "x = {x}, achieved {achieved}"
            );
        }
    }

    fn synthetic_task(seed: u64, n: usize) -> Dataset {
        let schema = DatasetSchema {
            label: "y".into(),
            favorable: "1".into(),
            features: vec![
                FeatureColumn {
                    name: "x1".into(),
                    kind: FeatureKind::Numeric,
                },
                FeatureColumn {
                    name: "g".into(),
                    kind: FeatureKind::Categorical,
                },
            ],
            sensitive: vec![SensitiveAttribute {
                name: "g".into(),
                privileged: "a".into(),
            }],
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut text = String::from("x1,g,y\n");
        for _ in 0..n {
            let privileged = rng.gen::<f64>() < 0.6;
            let x: f64 = rng.gen::<f64>() * 2.0 - 1.0;
            let z = 1.5 * x + if privileged { 0.7 } else { -0.7 };
            let y = u8::from(rng.gen::<f64>() < 1.0 / (1.0 + (-z).exp()));
            text.push_str(&format!(
                "{x},{},{y}\n",
                if privileged { "a" } else { "b" }
            ));
        }
        load_dataset_from_reader(text.as_bytes(), &schema).unwrap()
    }

    #[test]
    fn fit_and_apply_produce_valid_predictions() {
        let d = synthetic_task(3, 200);
        let ga = assign_groups(&d, &d).unwrap();
        let fit = naivebase_fit(&d, &ga, &Hyper::default(), 11).unwrap();
        assert!(fit.policy.privileged_sr >= 0.0 && fit.policy.privileged_sr <= 1.0);
        let pred = naivebase_apply(&fit, &d, &ga, 0).unwrap();
        assert_eq!(pred.len(), d.len());
        // Privileged predictions are exactly the model's default decisions.
        let probs = fit.pipeline.predict_proba(&d).unwrap();
        let ids = ga.ids_for(&d).unwrap();
        for i in 0..d.len() {
            if ids[i] == 0 {
                assert_eq!(pred.y_pred[i], u8::from(probs[i] > 0.5));
            }
        }
    }

    #[test]
    fn fit_is_deterministic_in_the_seed() {
        let d = synthetic_task(5, 150);
        let ga = assign_groups(&d, &d).unwrap();
        let a = naivebase_fit(&d, &ga, &Hyper::default(), 7).unwrap();
        let b = naivebase_fit(&d, &ga, &Hyper::default(), 7).unwrap();
        assert_eq!(a.policy.threshold, b.policy.threshold);
        assert_eq!(a.policy.privileged_sr, b.policy.privileged_sr);
        let c = naivebase_fit(&d, &ga, &Hyper::default(), 8).unwrap();
        // A different seed reshuffles the internal split; the policy may
        // coincide but the fitted coefficients must not all match.
        assert_ne!(a.pipeline.model.weights, c.pipeline.model.weights);
    }

    #[test]
    fn multi_group_task_rejected() {
        let schema = DatasetSchema {
            label: "y".into(),
            favorable: "1".into(),
            features: vec![FeatureColumn {
                name: "x1".into(),
                kind: FeatureKind::Numeric,
            }],
            sensitive: vec![
                SensitiveAttribute {
                    name: "s".into(),
                    privileged: "a".into(),
                },
                SensitiveAttribute {
                    name: "t".into(),
                    privileged: "x".into(),
                },
            ],
        };
        let text = "x1,s,t,y\n1,a,x,1\n2,a,y,0\n3,b,x,1\n4,b,y,0\n";
        let d = load_dataset_from_reader(text.as_bytes(), &schema).unwrap();
        let ga = assign_groups(&d, &d).unwrap();
        assert!(matches!(
            naivebase_fit(&d, &ga, &Hyper::default(), 1),
            Err(Error::InsufficientGroups(_))
        ));
    }
}
