//! The seeded experiment protocol: for each run, split the data, fit the
//! baseline model, apply every configured mitigation method, and measure
//! everything on the configured surface. Runs are independent given their
//! derived seeds, so they can execute in parallel; results are merged in
//! run order and are byte-identical however they were scheduled.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::dataset::{load_dataset, Dataset};
use crate::data::encode::FeatureEncoder;
use crate::data::groups::{assign_groups, GroupAssignment};
use crate::data::schema::DatasetSchema;
use crate::data::split::{split_dataset, split_train_indices, SplitConfig};
use crate::error::{Error, Result};
use crate::harness::config::{BuiltinMethod, ExperimentConfig, MethodSpec, Surface};
use crate::harness::scores::{load_scores, score_set_under, ScoreSet};
use crate::metrics::{build_report, MetricReport, PredictionSet};
use crate::mitigation::{
    ensemble_fit, ensemble_predict, eop_apply, eop_fit, naivebase_apply, naivebase_fit, reweigh,
    selective_apply, SelectiveScope,
};
use crate::model::fit_logistic;
use crate::seeding::{derive, derive_tagged};

/// One method's measurements on one run. A failed method run carries the
/// error text instead of a report and is excluded from aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    /// Fingerprint of the train partition; equal split_ids mean the exact
    /// same train/test membership.
    pub split_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodColumn {
    pub name: String,
    /// One record per run, in run order.
    pub records: Vec<RunRecord>,
}

/// Everything one experiment produced: per-method, per-run metric reports
/// plus the group structure they are keyed by. The unmitigated baseline is
/// always the first column, named `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub dataset: String,
    /// Sensitive attributes defining the task.
    pub task: Vec<String>,
    pub surface: Surface,
    pub runs: usize,
    pub seed: u64,
    pub train_fraction: f64,
    /// Demographic keys per group, rank order.
    pub group_keys: Vec<String>,
    /// Report labels per group (`p`/`u` for two groups, else `group1`...).
    pub group_labels: Vec<String>,
    pub methods: Vec<MethodColumn>,
    pub flags: Vec<String>,
}

impl RunResults {
    pub fn column(&self, name: &str) -> Option<&MethodColumn> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn base(&self) -> Result<&MethodColumn> {
        self.column("base").ok_or_else(|| {
            Error::Internal("results lack the baseline column".into())
        })
    }

    /// Short identifier for tables: dataset file stem plus the task
    /// attributes, e.g. `adult-sex`.
    pub fn task_id(&self) -> String {
        let stem = std::path::Path::new(&self.dataset)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.dataset.clone());
        let mut id = stem;
        for attr in &self.task {
            id.push('-');
            id.push_str(attr);
        }
        id
    }
}

fn split_fingerprint(indices: &[usize]) -> String {
    let mut hasher = Sha256::new();
    for &i in indices {
        hasher.update((i as u64).to_le_bytes());
    }
    let digest = hasher.finalize();
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// The shared per-run context every method consumes.
struct RunContext<'a> {
    cfg: &'a ExperimentConfig,
    groups: &'a GroupAssignment,
    run: usize,
    seed: u64,
    train: Dataset,
    surface_ds: Dataset,
    /// Baseline pipeline predictions on the surface.
    base_pred: PredictionSet,
    /// Baseline predictions on the training slice (threshold-tuning data
    /// for post-processors).
    train_pred: PredictionSet,
    encoder: FeatureEncoder,
    x_train: crate::data::encode::FeatureMatrix,
}

fn apply_builtin(
    ctx: &RunContext,
    method: BuiltinMethod,
) -> Result<(PredictionSet, serde_json::Value)> {
    match method {
        BuiltinMethod::Reweigh => {
            let plan = reweigh(&ctx.train, ctx.groups)?;
            let model = fit_logistic(
                &ctx.x_train,
                &ctx.train.labels,
                &plan.weights,
                &ctx.cfg.hyper,
                ctx.seed,
            )?;
            let probs = model.predict_proba(&ctx.encoder.encode(&ctx.surface_ds)?)?;
            let y_pred = probs.iter().map(|&p| u8::from(p > 0.5)).collect();
            let pred = PredictionSet::new(
                ctx.surface_ds.labels.clone(),
                y_pred,
                probs,
                ctx.base_pred.group_of.clone(),
                ctx.run,
            )?;
            Ok((pred, plan.policy_json()))
        }
        BuiltinMethod::EqualizedOdds => {
            let policy = eop_fit(&ctx.train_pred, ctx.groups.len())?;
            let pred = eop_apply(&policy, &ctx.base_pred)?;
            Ok((pred, policy.policy_json()))
        }
        BuiltinMethod::NaiveParity => {
            let fit = naivebase_fit(
                &ctx.train,
                ctx.groups,
                &ctx.cfg.hyper,
                derive_tagged(ctx.seed, "naivebase"),
            )?;
            let pred = naivebase_apply(&fit, &ctx.surface_ds, ctx.groups, ctx.run)?;
            Ok((pred, fit.policy.policy_json()))
        }
        BuiltinMethod::CounterfactualEnsemble => {
            let model = ensemble_fit(
                &ctx.train,
                ctx.groups,
                &ctx.cfg.hyper,
                derive_tagged(ctx.seed, "cfe"),
            )?;
            let pred = ensemble_predict(&model, &ctx.surface_ds, ctx.groups, ctx.run)?;
            Ok((pred, model.policy_json()))
        }
    }
}

fn apply_method(
    ctx: &RunContext,
    spec: &MethodSpec,
    external: Option<&BTreeMap<usize, ScoreSet>>,
    schema: &DatasetSchema,
) -> Result<(PredictionSet, serde_json::Value)> {
    let (pred, mut policy) = if let Some(runs) = external {
        let set = runs.get(&ctx.run).ok_or_else(|| {
            Error::ScoreFile(format!(
                "score file for method {:?} has no rows for run {}",
                spec.name, ctx.run
            ))
        })?;
        let pred = score_set_under(set, schema, ctx.groups)?;
        (pred, serde_json::json!({"source": "external scores"}))
    } else {
        apply_builtin(ctx, spec.builtin()?)?
    };
    if let Some(targets) = &spec.selective {
        let scope = SelectiveScope::new(targets.iter().copied());
        let merged = selective_apply(&ctx.base_pred, &pred, ctx.groups.len(), &scope)?;
        if let serde_json::Value::Object(map) = &mut policy {
            map.insert("selective".into(), serde_json::json!(targets));
        }
        return Ok((merged, policy));
    }
    Ok((pred, policy))
}

/// Everything produced by one run: the split fingerprint and one outcome
/// slot per column (base first), each either a (report, policy) pair or an
/// error message.
struct RunSlice {
    seed: u64,
    split_id: String,
    outcomes: Vec<std::result::Result<(MetricReport, Option<serde_json::Value>), String>>,
}

fn execute_run(
    cfg: &ExperimentConfig,
    full: &Dataset,
    groups: &GroupAssignment,
    schema: &DatasetSchema,
    external: &BTreeMap<String, BTreeMap<usize, ScoreSet>>,
    run: usize,
) -> RunSlice {
    let seed = derive(cfg.seed, run as u64);
    let split_cfg = SplitConfig {
        train_fraction: cfg.split.train_fraction,
        seed,
    };
    let n_columns = cfg.methods.len() + 1;
    let fail_all = |msg: String| RunSlice {
        seed,
        split_id: String::new(),
        outcomes: (0..n_columns).map(|_| Err(msg.clone())).collect(),
    };

    let (train, test) = match split_dataset(full, &split_cfg) {
        Ok(pair) => pair,
        Err(e) => return fail_all(e.to_string()),
    };
    let split_id = match split_train_indices(full.len(), &split_cfg) {
        Ok(idx) => split_fingerprint(&idx),
        Err(e) => return fail_all(e.to_string()),
    };
    let surface_ds = match cfg.surface {
        Surface::Test => test,
        Surface::Train => train.clone(),
    };

    let base_run = || -> Result<RunContext> {
        let encoder = FeatureEncoder::fit(&train)?;
        let x_train = encoder.encode(&train)?;
        let model = fit_logistic(
            &x_train,
            &train.labels,
            &vec![1.0; train.len()],
            &cfg.hyper,
            seed,
        )?;
        let surface_probs = model.predict_proba(&encoder.encode(&surface_ds)?)?;
        let surface_pred = PredictionSet::new(
            surface_ds.labels.clone(),
            surface_probs.iter().map(|&p| u8::from(p > 0.5)).collect(),
            surface_probs,
            groups.ids_for(&surface_ds)?,
            run,
        )?;
        let train_probs = model.predict_proba(&x_train)?;
        let train_pred = PredictionSet::new(
            train.labels.clone(),
            train_probs.iter().map(|&p| u8::from(p > 0.5)).collect(),
            train_probs,
            groups.ids_for(&train)?,
            run,
        )?;
        Ok(RunContext {
            cfg,
            groups,
            run,
            seed,
            train: train.clone(),
            surface_ds: surface_ds.clone(),
            base_pred: surface_pred,
            train_pred,
            encoder,
            x_train,
        })
    };
    let ctx = match base_run() {
        Ok(ctx) => ctx,
        Err(e) => {
            let mut slice = fail_all(format!("baseline failed: {e}"));
            slice.split_id = split_id;
            return slice;
        }
    };

    let mut outcomes = Vec::with_capacity(n_columns);
    outcomes.push(
        build_report(&ctx.base_pred, groups.len())
            .map(|r| (r, None))
            .map_err(|e| e.to_string()),
    );
    for spec in &cfg.methods {
        let outcome = apply_method(&ctx, spec, external.get(&spec.name), schema)
            .and_then(|(pred, policy)| Ok((build_report(&pred, groups.len())?, Some(policy))))
            .map_err(|e| e.to_string());
        outcomes.push(outcome);
    }
    RunSlice {
        seed,
        split_id,
        outcomes,
    }
}

/// Runs the whole experiment. `parallel` chooses between rayon-scheduled
/// and strictly serial execution; both produce identical results.
pub fn run_experiment_with(cfg: &ExperimentConfig, parallel: bool) -> Result<RunResults> {
    cfg.validate()?;
    let schema_full = DatasetSchema::from_file(&cfg.schema)?;
    let schema = match &cfg.task {
        Some(attrs) => schema_full.with_sensitive_subset(attrs)?,
        None => schema_full,
    };
    let full = load_dataset(&cfg.dataset, &schema)?;
    // One canonical group ranking for the whole experiment (favored rates
    // from the full data), so group ids and labels mean the same thing in
    // every run. Per-run train rates would let the ranking flip between
    // runs and silently mix groups within a metric series.
    let groups = assign_groups(&full, &full)?;

    let mut external: BTreeMap<String, BTreeMap<usize, ScoreSet>> = BTreeMap::new();
    for spec in &cfg.methods {
        if let Some(path) = &spec.scores {
            let sets = load_scores(path, &schema)?;
            external.insert(
                spec.name.clone(),
                sets.into_iter().map(|s| (s.run_id, s)).collect(),
            );
        }
    }

    let run_one = |r: usize| execute_run(cfg, &full, &groups, &schema, &external, r);
    let slices: Vec<RunSlice> = if parallel {
        (0..cfg.runs).into_par_iter().map(run_one).collect()
    } else {
        (0..cfg.runs).map(run_one).collect()
    };

    let mut column_names = vec!["base".to_string()];
    column_names.extend(cfg.methods.iter().map(|m| m.name.clone()));
    let mut methods: Vec<MethodColumn> = column_names
        .into_iter()
        .map(|name| MethodColumn {
            name,
            records: Vec::with_capacity(cfg.runs),
        })
        .collect();
    let mut flags: Vec<String> = Vec::new();
    for (run, slice) in slices.into_iter().enumerate() {
        for (c, outcome) in slice.outcomes.into_iter().enumerate() {
            let record = match outcome {
                Ok((report, policy)) => RunRecord {
                    run,
                    seed: slice.seed,
                    split_id: slice.split_id.clone(),
                    report: Some(report),
                    policy,
                    error: None,
                },
                Err(msg) => {
                    let flag = format!(
                        "method {} failed on run {run}: {msg}; excluded from aggregation",
                        methods[c].name
                    );
                    if !flags.contains(&flag) {
                        flags.push(flag);
                    }
                    RunRecord {
                        run,
                        seed: slice.seed,
                        split_id: slice.split_id.clone(),
                        report: None,
                        policy: None,
                        error: Some(msg),
                    }
                }
            };
            methods[c].records.push(record);
        }
    }
    for f in &groups.flags {
        let msg = format!("group construction: {f}");
        if !flags.contains(&msg) {
            flags.push(msg);
        }
    }
    if cfg.surface == Surface::Train {
        flags.push("metrics computed on training instances, not held-out data".into());
    }

    Ok(RunResults {
        dataset: cfg.dataset.display().to_string(),
        task: schema.sensitive.iter().map(|s| s.name.clone()).collect(),
        surface: cfg.surface,
        runs: cfg.runs,
        seed: cfg.seed,
        train_fraction: cfg.split.train_fraction,
        group_keys: groups.groups.iter().map(|g| g.key.clone()).collect(),
        group_labels: groups.report_labels(),
        methods,
        flags,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResults> {
    run_experiment_with(cfg, true)
}
