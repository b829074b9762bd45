//! Weighted logistic regression trained by full-batch gradient descent.
//! Training starts from zero coefficients and is fully deterministic: the
//! same matrix, labels, weights, and hyperparameters give bit-identical
//! models on every platform, which the experiment protocol relies on.

use serde::{Deserialize, Serialize};

use crate::data::encode::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyper: Hyper,
    pub seed: u64,
    pub flags: Vec<String>,
}

/// Probabilities are clamped away from exactly 0 and 1 so downstream
/// thresholding at the extremes stays well-defined.
const PROB_EPS: f64 = 1e-15;

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fits by minimizing weighted cross-entropy plus an L2 penalty on the
/// coefficients (never the intercept). The gradient is normalized by total
/// instance weight, so scaling every weight by the same constant — or
/// replacing a weight-k instance with k unit-weight copies — leaves the
/// training trajectory unchanged.
pub fn fit_logistic(
    x: &FeatureMatrix,
    y: &[u8],
    instance_weights: &[f64],
    hyper: &Hyper,
    seed: u64,
) -> Result<LogisticModel> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::EmptyInput("cannot fit on an empty matrix".into()));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{n} rows but {} labels",
            y.len()
        )));
    }
    if instance_weights.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{n} rows but {} instance weights",
            instance_weights.len()
        )));
    }
    if let Some(w) = instance_weights.iter().find(|w| **w < 0.0 || !w.is_finite()) {
        return Err(Error::BadWeights(format!(
            "instance weights must be finite and non-negative, found {w}"
        )));
    }
    let total_weight: f64 = instance_weights.iter().sum();
    if total_weight <= 0.0 {
        return Err(Error::BadWeights("total instance weight is zero".into()));
    }

    let mut flags = Vec::new();
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == n {
        flags.push(format!(
            "training labels are single-class ({} of {n} positive)",
            positives
        ));
    }

    let d = x.cols();
    let mut weights = vec![0.0f64; d];
    let mut bias = 0.0f64;
    let mut grad = vec![0.0f64; d];

    for _ in 0..hyper.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_bias = 0.0f64;
        for i in 0..n {
            let row = x.row(i);
            let mut z = bias;
            for (w, v) in weights.iter().zip(row) {
                z += w * v;
            }
            let err = instance_weights[i] * (sigmoid(z) - f64::from(y[i]));
            for (g, v) in grad.iter_mut().zip(row) {
                *g += err * v;
            }
            grad_bias += err;
        }
        let scale = hyper.learning_rate / total_weight;
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= scale * g + hyper.learning_rate * hyper.l2 * *w;
        }
        bias -= scale * grad_bias;
    }

    Ok(LogisticModel {
        weights,
        bias,
        hyper: *hyper,
        seed,
        flags,
    })
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.cols(),
            });
        }
        Ok((0..x.rows())
            .map(|i| {
                let mut z = self.bias;
                for (w, v) in self.weights.iter().zip(x.row(i)) {
                    z += w * v;
                }
                sigmoid(z).clamp(PROB_EPS, 1.0 - PROB_EPS)
            })
            .collect())
    }

    /// Hard labels: 1 where the probability strictly exceeds `threshold`.
    pub fn predict(&self, x: &FeatureMatrix, threshold: f64) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| u8::from(p > threshold))
            .collect())
    }
}

/// On-disk model format; the dictionary fingerprint ties the coefficients
/// to the exact feature encoding they were trained against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelExport {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyper: Hyper,
    pub seed: u64,
    pub feature_dictionary_hash: String,
}

pub fn export_model(model: &LogisticModel, dictionary_hash: &str) -> Result<String> {
    let export = ModelExport {
        weights: model.weights.clone(),
        bias: model.bias,
        hyper: model.hyper,
        seed: model.seed,
        feature_dictionary_hash: dictionary_hash.to_string(),
    };
    Ok(serde_json::to_string_pretty(&export)?)
}

pub fn import_model(text: &str) -> Result<(LogisticModel, String)> {
    let export: ModelExport = serde_json::from_str(text)?;
    Ok((
        LogisticModel {
            weights: export.weights,
            bias: export.bias,
            hyper: export.hyper,
            seed: export.seed,
            flags: Vec::new(),
        },
        export.feature_dictionary_hash,
    ))
}
