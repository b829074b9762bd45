//! Bias-mitigation methods and the machinery to apply them selectively.
//!
//! Three intervention points are covered: reweighing the training
//! distribution before fitting ([`reweigh`]), learning an ensemble of a
//! factual and a counterfactual model ([`ensemble`]), and post-processing
//! predictions with per-group thresholds ([`eop`], [`naivebase`]).
//! [`selective`] restricts any of them to chosen demographic groups while
//! conserving the original predictions everywhere else.

pub mod ensemble;
pub mod eop;
pub mod naivebase;
pub mod reweigh;
pub mod selective;

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::data::encode::FeatureEncoder;
use crate::error::Result;
use crate::model::LogisticModel;

/// A feature dictionary and the model trained on it, kept together so the
/// model is never applied to a differently-encoded matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pipeline {
    pub encoder: FeatureEncoder,
    pub model: LogisticModel,
}

impl Pipeline {
    pub fn predict_proba(&self, d: &Dataset) -> Result<Vec<f64>> {
        self.model.predict_proba(&self.encoder.encode(d)?)
    }

    pub fn predict(&self, d: &Dataset, threshold: f64) -> Result<Vec<u8>> {
        self.model.predict(&self.encoder.encode(d)?, threshold)
    }
}

pub use ensemble::{counterfactual_flip, ensemble_fit, ensemble_predict, EnsembleModel};
pub use eop::{eop_apply, eop_fit, ThresholdPolicy};
pub use naivebase::{naivebase_apply, naivebase_fit, NaiveBaseFit, NaiveBasePolicy};
pub use reweigh::{reweigh, reweigh_from_parts, WeightPlan};
pub use selective::{selective_apply, SelectiveScope};
