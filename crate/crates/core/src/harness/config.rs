//! Experiment configuration: which dataset and sensitive attributes, which
//! mitigation methods, how many seeded repetitions, and which surface
//! (train or test) the metrics are computed on.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Hyper;

/// Which instances the metrics are computed on. `Test` is the ordinary
/// held-out evaluation; `Train` measures the training instances themselves
/// (used when inspecting the data a mitigator saw) and is flagged in the
/// results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    #[default]
    Test,
    Train,
}

impl Surface {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "test" => Ok(Surface::Test),
            "train" => Ok(Surface::Train),
            other => Err(Error::Config(format!(
                "unknown surface {other:?}; expected \"test\" or \"train\""
            ))),
        }
    }
}

/// A built-in mitigation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinMethod {
    /// Pre-processing: instance reweighing toward group/label independence.
    Reweigh,
    /// Post-processing: per-group decision thresholds equalizing TPR/FPR.
    EqualizedOdds,
    /// Post-processing: unprivileged threshold matching the privileged
    /// selection rate on a held-out slice.
    NaiveParity,
    /// In-processing: factual/counterfactual model blend.
    CounterfactualEnsemble,
}

impl BuiltinMethod {
    pub fn parse(token: &str) -> Result<Self> {
        match token.to_ascii_lowercase().as_str() {
            "rew" | "reweigh" | "reweighing" => Ok(BuiltinMethod::Reweigh),
            "eop" | "eo" => Ok(BuiltinMethod::EqualizedOdds),
            "naivebase" | "naive" => Ok(BuiltinMethod::NaiveParity),
            "cfe" | "ensemble" | "counterfactual-ensemble" => {
                Ok(BuiltinMethod::CounterfactualEnsemble)
            }
            other => Err(Error::Config(format!(
                "unknown method {other:?}; expected rew, eop, naivebase, or cfe \
                 (or attach a score file)"
            ))),
        }
    }
}

/// One method column of the experiment: a built-in mitigator (optionally
/// applied only to selected groups) or an external score file standing in
/// for a method implemented elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    /// Column name in results and tables. Doubles as the built-in method
    /// token when `kind` is absent.
    pub name: String,
    /// Built-in method token (rew, eop, naivebase, cfe) when it differs
    /// from `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// CSV of externally produced predictions; replaces the built-in fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    /// Group ids (rank order) receiving the mitigated predictions; all
    /// other instances keep the baseline's. Absent = apply everywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selective: Option<Vec<usize>>,
}

impl MethodSpec {
    pub fn builtin(&self) -> Result<BuiltinMethod> {
        BuiltinMethod::parse(self.kind.as_deref().unwrap_or(&self.name))
    }
}

/// Train/test partition shape; the per-run seed comes from the experiment
/// seed, not from here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
        }
    }
}

fn default_runs() -> usize {
    20
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset CSV path.
    pub dataset: PathBuf,
    /// Schema JSON path.
    pub schema: PathBuf,
    /// Sensitive attributes defining the task, in the schema's declaration
    /// order; absent = all attributes the schema declares.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Vec<String>>,
    /// Mitigation methods to run; the unmitigated baseline (`base`) always
    /// runs and need not be listed.
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub surface: Surface,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Logistic-regression hyperparameters for every model in the run.
    #[serde(default)]
    pub hyper: Hyper,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.split.train_fraction
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.methods {
            if m.name == "base" {
                return Err(Error::Config(
                    "the method name \"base\" is reserved for the unmitigated baseline".into(),
                ));
            }
            if !seen.insert(m.name.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate method name {:?}",
                    m.name
                )));
            }
            if m.scores.is_none() {
                m.builtin()?;
            }
            if let Some(sel) = &m.selective {
                if sel.is_empty() {
                    return Err(Error::Config(format!(
                        "method {:?}: selective group list must not be empty",
                        m.name
                    )));
                }
            }
        }
        if let Some(task) = &self.task {
            if task.is_empty() {
                return Err(Error::Config(
                    "task must name at least one sensitive attribute".into(),
                ));
            }
        }
        Ok(())
    }
}
