//! Aggregation of run results into the audit's table shapes: the
//! increase/tie/decrease frequency table, the mean-effect table, the
//! 9-metric delta correlation matrix, and the win-tie-loss comparison of
//! two methods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::runner::{MethodColumn, RunResults};
use crate::stats::{
    classify_impact, metric_orientation, spearman, win_tie_loss, Direction, Outcome, ALPHA,
};

/// The nine group-level metrics whose per-task changes feed the
/// correlation matrix.
pub const DELTA_METRICS: [&str; 9] = [
    "sr_p", "tpr_p", "fpr_p", "sr_u", "tpr_u", "fpr_u", "spd", "eod", "aod",
];

/// Everything the frequency/effect/comparison tables track: the nine group
/// metrics plus overall performance.
pub const TABLE_METRICS: [&str; 12] = [
    "sr_p", "tpr_p", "fpr_p", "sr_u", "tpr_u", "fpr_u", "spd", "eod", "aod", "accuracy",
    "macro_f1", "mcc",
];

/// Paired per-run metric values: baseline sample and method sample over the
/// runs where both are defined.
fn paired_series(res: &RunResults, method: &MethodColumn, metric: &str) -> (Vec<f64>, Vec<f64>) {
    let base = match res.base() {
        Ok(b) => b,
        Err(_) => return (Vec::new(), Vec::new()),
    };
    let mut before = Vec::new();
    let mut after = Vec::new();
    for (b, m) in base.records.iter().zip(&method.records) {
        let (Some(rb), Some(rm)) = (&b.report, &m.report) else {
            continue;
        };
        let (Some(vb), Some(vm)) = (
            rb.metric(metric, &res.group_labels),
            rm.metric(metric, &res.group_labels),
        ) else {
            continue;
        };
        before.push(vb);
        after.push(vm);
    }
    (before, after)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Methods other than `base`, in first-appearance order across tasks.
fn method_names(results: &[RunResults]) -> Vec<String> {
    let mut names = Vec::new();
    for res in results {
        for m in &res.methods {
            if m.name != "base" && !names.contains(&m.name) {
                names.push(m.name.clone());
            }
        }
    }
    names
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyCell {
    pub increase: usize,
    pub tie: usize,
    pub decrease: usize,
}

impl FrequencyCell {
    /// Table-2-shaped rendering: `↑2 −8 ↓22`.
    pub fn rendered(&self) -> String {
        format!("↑{} −{} ↓{}", self.increase, self.tie, self.decrease)
    }
}

/// Counts, per method and metric, of the tasks where the method
/// significantly increased, tied with, or significantly decreased the
/// baseline's metric across the paired runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub metrics: Vec<String>,
    pub methods: Vec<String>,
    /// cells[method][metric]
    pub cells: Vec<Vec<FrequencyCell>>,
    pub tasks: usize,
    pub flags: Vec<String>,
}

pub fn frequency_table(results: &[RunResults]) -> Result<FrequencyTable> {
    if results.is_empty() {
        return Err(Error::EmptyInput("no run results to tabulate".into()));
    }
    let methods = method_names(results);
    let metrics: Vec<String> = TABLE_METRICS.iter().map(|s| s.to_string()).collect();
    let mut cells = vec![vec![FrequencyCell::default(); metrics.len()]; methods.len()];
    let mut flags = Vec::new();
    for res in results {
        for (mi, name) in methods.iter().enumerate() {
            let Some(column) = res.column(name) else {
                flags.push(format!(
                    "task {}: method {name} absent; skipped",
                    res.task_id()
                ));
                continue;
            };
            for (ki, metric) in metrics.iter().enumerate() {
                let (before, after) = paired_series(res, column, metric);
                if before.is_empty() {
                    flags.push(format!(
                        "task {}: no paired {metric} samples for {name}; skipped",
                        res.task_id()
                    ));
                    continue;
                }
                let verdict = classify_impact(&before, &after)?;
                match verdict.direction {
                    Direction::Increase => cells[mi][ki].increase += 1,
                    Direction::Tie => cells[mi][ki].tie += 1,
                    Direction::Decrease => cells[mi][ki].decrease += 1,
                }
            }
        }
    }
    Ok(FrequencyTable {
        metrics,
        methods,
        cells,
        tasks: results.len(),
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectCell {
    /// Mean over tasks of (mean after − mean before).
    pub mean_delta: f64,
    pub mean_after: f64,
    pub mean_before: f64,
    /// The most adverse-direction task change: largest decrease for
    /// privileged-group metrics, largest increase for unprivileged-group
    /// metrics, largest magnitude otherwise (signed).
    pub extreme_delta: f64,
    /// Percentage of tasks with a significant, large-effect change.
    pub large_pct: f64,
    /// Tasks contributing data.
    pub tasks: usize,
}

impl EffectCell {
    /// Table-3-shaped rendering: `-0.026 (0.462-0.489)` — the mean change
    /// followed by the absolute after/before values it came from.
    pub fn rendered(&self) -> String {
        format!(
            "{:+.3} ({:.3}-{:.3})",
            self.mean_delta, self.mean_after, self.mean_before
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectTable {
    pub metrics: Vec<String>,
    pub methods: Vec<String>,
    /// cells[method][metric]; `None` when no task had data.
    pub cells: Vec<Vec<Option<EffectCell>>>,
    pub flags: Vec<String>,
}

pub fn effect_table(results: &[RunResults]) -> Result<EffectTable> {
    if results.is_empty() {
        return Err(Error::EmptyInput("no run results to tabulate".into()));
    }
    let methods = method_names(results);
    let metrics: Vec<String> = TABLE_METRICS.iter().map(|s| s.to_string()).collect();
    let mut cells = vec![vec![None; metrics.len()]; methods.len()];
    let mut flags = Vec::new();
    for (mi, name) in methods.iter().enumerate() {
        for (ki, metric) in metrics.iter().enumerate() {
            let mut deltas = Vec::new();
            let mut afters = Vec::new();
            let mut befores = Vec::new();
            let mut large = 0usize;
            for res in results {
                let Some(column) = res.column(name) else {
                    continue;
                };
                let (before, after) = paired_series(res, column, metric);
                if before.is_empty() {
                    flags.push(format!(
                        "task {}: no paired {metric} samples for {name}; skipped",
                        res.task_id()
                    ));
                    continue;
                }
                let verdict = classify_impact(&before, &after)?;
                if verdict.direction != Direction::Tie && verdict.large {
                    large += 1;
                }
                befores.push(mean(&before));
                afters.push(mean(&after));
                deltas.push(mean(&after) - mean(&before));
            }
            if deltas.is_empty() {
                continue;
            }
            let extreme = match metric.rsplit_once('_').map(|(_, g)| g) {
                Some("p") => deltas.iter().copied().fold(f64::INFINITY, f64::min),
                Some("u") => deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                _ => deltas
                    .iter()
                    .copied()
                    .fold(0.0f64, |acc, d| if d.abs() > acc.abs() { d } else { acc }),
            };
            cells[mi][ki] = Some(EffectCell {
                mean_delta: mean(&deltas),
                mean_after: mean(&afters),
                mean_before: mean(&befores),
                extreme_delta: extreme,
                large_pct: 100.0 * large as f64 / deltas.len() as f64,
                tasks: deltas.len(),
            });
        }
    }
    Ok(EffectTable {
        metrics,
        methods,
        cells,
        flags,
    })
}

/// Spearman correlations between the per-(task, method) mean changes of
/// the nine group metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub metrics: Vec<String>,
    /// rho[i][j]; `None` when a series was constant.
    pub rho: Vec<Vec<Option<f64>>>,
    pub p: Vec<Vec<Option<f64>>>,
    /// True where the correlation is significant at 0.05.
    pub significant: Vec<Vec<bool>>,
    /// Number of (task, method) observations behind every series.
    pub observations: usize,
    pub flags: Vec<String>,
}

impl CorrelationMatrix {
    pub fn cell(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.metrics.iter().position(|m| m == a)?;
        let j = self.metrics.iter().position(|m| m == b)?;
        self.rho[i][j]
    }
}

pub fn correlation_matrix(results: &[RunResults]) -> Result<CorrelationMatrix> {
    let metrics: Vec<String> = DELTA_METRICS.iter().map(|s| s.to_string()).collect();
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); metrics.len()];
    let mut flags = Vec::new();
    for res in results {
        if res.group_labels != ["p", "u"] {
            flags.push(format!(
                "task {}: not a two-group task; excluded from the correlation grid",
                res.task_id()
            ));
            continue;
        }
        for column in &res.methods {
            if column.name == "base" {
                continue;
            }
            // An observation enters only with all nine deltas defined, so
            // the series stay aligned.
            let mut deltas = Vec::with_capacity(metrics.len());
            for metric in &metrics {
                let (before, after) = paired_series(res, column, metric);
                if before.is_empty() {
                    break;
                }
                deltas.push(mean(&after) - mean(&before));
            }
            if deltas.len() == metrics.len() {
                for (s, d) in series.iter_mut().zip(&deltas) {
                    s.push(*d);
                }
            } else {
                flags.push(format!(
                    "task {}: method {} lacks defined deltas; excluded",
                    res.task_id(),
                    column.name
                ));
            }
        }
    }
    let n = series[0].len();
    if n < 3 {
        return Err(Error::EmptySample(format!(
            "correlation matrix needs at least 3 (task, method) observations, got {n}"
        )));
    }
    let k = metrics.len();
    let mut rho = vec![vec![None; k]; k];
    let mut p = vec![vec![None; k]; k];
    let mut significant = vec![vec![false; k]; k];
    for i in 0..k {
        rho[i][i] = Some(1.0);
        p[i][i] = Some(0.0);
        significant[i][i] = true;
        for j in (i + 1)..k {
            match spearman(&series[i], &series[j]) {
                Ok(t) => {
                    rho[i][j] = Some(t.statistic);
                    rho[j][i] = Some(t.statistic);
                    p[i][j] = Some(t.p_value);
                    p[j][i] = Some(t.p_value);
                    let sig = t.p_value < ALPHA;
                    significant[i][j] = sig;
                    significant[j][i] = sig;
                }
                Err(Error::ConstantInput(_)) => {
                    flags.push(format!(
                        "constant delta series for {} / {}; correlation undefined",
                        metrics[i], metrics[j]
                    ));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(CorrelationMatrix {
        metrics,
        rho,
        p,
        significant,
        observations: n,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WtlRow {
    pub metric: String,
    pub win: usize,
    pub tie: usize,
    pub loss: usize,
}

/// Win-tie-loss comparison of one method column against another over the
/// same tasks and splits, plus the mean overall-selection-rate difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method_a: String,
    pub method_b: String,
    pub rows: Vec<WtlRow>,
    /// Mean over tasks of (mean overall SR of A − mean overall SR of B).
    pub mean_overall_sr_delta: f64,
    pub tasks: usize,
    pub flags: Vec<String>,
}

/// Fetches a column by name with a user-facing error.
fn column_of<'a>(res: &'a RunResults, name: &str) -> Result<&'a MethodColumn> {
    res.column(name).ok_or_else(|| {
        Error::Config(format!(
            "results for task {} have no method column {name:?}",
            res.task_id()
        ))
    })
}

pub fn compare_methods(
    a: &[RunResults],
    b: &[RunResults],
    method_a: &str,
    method_b: &str,
) -> Result<Comparison> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::LengthMismatch(format!(
            "comparison needs matching task lists, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut metrics: Vec<String> = TABLE_METRICS.iter().map(|s| s.to_string()).collect();
    metrics.push("overall_sr".into());
    let mut rows: Vec<WtlRow> = metrics
        .iter()
        .map(|m| WtlRow {
            metric: m.clone(),
            win: 0,
            tie: 0,
            loss: 0,
        })
        .collect();
    let mut flags = Vec::new();
    let mut sr_deltas = Vec::new();
    for (ra, rb) in a.iter().zip(b) {
        let ca = column_of(ra, method_a)?;
        let cb = column_of(rb, method_b)?;
        if ca.records.len() != cb.records.len() {
            return Err(Error::SplitMismatch(format!(
                "task {}: {} runs vs {} runs",
                ra.task_id(),
                ca.records.len(),
                cb.records.len()
            )));
        }
        for (x, y) in ca.records.iter().zip(&cb.records) {
            if x.split_id != y.split_id {
                return Err(Error::SplitMismatch(format!(
                    "task {}, run {}: the two result sets use different data splits; \
                     a paired comparison requires shared splits",
                    ra.task_id(),
                    x.run
                )));
            }
        }
        for (ri, metric) in metrics.iter().enumerate() {
            let sa = collect_metric(ra, ca, metric);
            let sb = collect_metric(rb, cb, metric);
            if sa.is_empty() || sb.is_empty() {
                flags.push(format!(
                    "task {}: no {metric} samples on one side; skipped",
                    ra.task_id()
                ));
                continue;
            }
            let orientation = metric_orientation(metric).ok_or_else(|| {
                Error::Internal(format!("no orientation for metric {metric}"))
            })?;
            let verdict = win_tie_loss(&sa, &sb, orientation)?;
            match verdict.outcome {
                Outcome::Win => rows[ri].win += 1,
                Outcome::Tie => rows[ri].tie += 1,
                Outcome::Loss => rows[ri].loss += 1,
            }
        }
        let sa = collect_metric(ra, ca, "overall_sr");
        let sb = collect_metric(rb, cb, "overall_sr");
        if !sa.is_empty() && !sb.is_empty() {
            sr_deltas.push(mean(&sa) - mean(&sb));
        }
    }
    if sr_deltas.is_empty() {
        return Err(Error::EmptySample(
            "no overall selection rates to compare".into(),
        ));
    }
    Ok(Comparison {
        method_a: method_a.to_string(),
        method_b: method_b.to_string(),
        rows,
        mean_overall_sr_delta: mean(&sr_deltas),
        tasks: a.len(),
        flags,
    })
}

fn collect_metric(res: &RunResults, column: &MethodColumn, metric: &str) -> Vec<f64> {
    column
        .records
        .iter()
        .filter_map(|r| r.report.as_ref())
        .filter_map(|rep| rep.metric(metric, &res.group_labels))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Surface;
    use crate::harness::runner::RunRecord;
    use crate::metrics::{FairnessScores, GroupRates, MetricReport, PerformanceScores, RateSet};

    /// A two-group report with every metric derived from six rates plus an
    /// accuracy knob.
    fn report(sr_p: f64, tpr_p: f64, fpr_p: f64, sr_u: f64, tpr_u: f64, fpr_u: f64) -> MetricReport {
        MetricReport {
            rates: GroupRates {
                per_group: vec![
                    RateSet {
                        sr: Some(sr_p),
                        tpr: Some(tpr_p),
                        fpr: Some(fpr_p),
                    },
                    RateSet {
                        sr: Some(sr_u),
                        tpr: Some(tpr_u),
                        fpr: Some(fpr_u),
                    },
                ],
                flags: vec![],
            },
            fairness: FairnessScores {
                spd: Some((sr_p - sr_u).abs()),
                eod: Some((tpr_p - tpr_u).abs()),
                aod: Some((((tpr_p - tpr_u) + (fpr_p - fpr_u)) / 2.0).abs()),
                flags: vec![],
            },
            performance: PerformanceScores {
                accuracy: (sr_p + sr_u) / 2.0,
                macro_precision: 0.5,
                macro_recall: 0.5,
                macro_f1: 0.5,
                mcc: 0.0,
            },
            overall_sr: (sr_p + sr_u) / 2.0,
            flags: vec![],
        }
    }

    fn column(name: &str, reports: Vec<MetricReport>) -> MethodColumn {
        MethodColumn {
            name: name.into(),
            records: reports
                .into_iter()
                .enumerate()
                .map(|(r, rep)| RunRecord {
                    run: r,
                    seed: r as u64,
                    split_id: format!("split{r}"),
                    report: Some(rep),
                    policy: None,
                    error: None,
                })
                .collect(),
        }
    }

    fn results(task: &str, methods: Vec<MethodColumn>) -> RunResults {
        let runs = methods[0].records.len();
        RunResults {
            dataset: format!("{task}.csv"),
            task: vec!["sex".into()],
            surface: Surface::Test,
            runs,
            seed: 0,
            train_fraction: 0.7,
            group_keys: vec!["sex=a".into(), "sex!=a".into()],
            group_labels: vec!["p".into(), "u".into()],
            methods,
            flags: vec![],
        }
    }

    /// Twenty baseline reports with mild deterministic jitter.
    fn base_reports() -> Vec<MetricReport> {
        (0..20)
            .map(|i| {
                let j = (i as f64) * 0.003;
                report(0.50 + j, 0.60 + j, 0.20 + j, 0.30 + j, 0.40 + j, 0.10 + j)
            })
            .collect()
    }

    fn shifted(reports: &[MetricReport], d: f64) -> Vec<MetricReport> {
        reports
            .iter()
            .map(|r| {
                let g = &r.rates.per_group;
                report(
                    g[0].sr.unwrap() - d,
                    g[0].tpr.unwrap() - d,
                    g[0].fpr.unwrap() - d,
                    g[1].sr.unwrap() + d,
                    g[1].tpr.unwrap() + d,
                    g[1].fpr.unwrap() + d,
                )
            })
            .collect()
    }

    #[test]
    fn identical_method_yields_all_ties() {
        let base = base_reports();
        let res = results(
            "toy",
            vec![column("base", base.clone()), column("same", base)],
        );
        let table = frequency_table(std::slice::from_ref(&res)).unwrap();
        for cell in &table.cells[0] {
            assert_eq!(cell.increase, 0);
            assert_eq!(cell.decrease, 0);
            assert_eq!(cell.tie, 1);
        }
    }

    #[test]
    fn single_task_rows_sum_to_one() {
        let base = base_reports();
        let method = shifted(&base, 0.1);
        let res = results("toy", vec![column("base", base), column("m", method)]);
        let table = frequency_table(std::slice::from_ref(&res)).unwrap();
        assert_eq!(table.tasks, 1);
        for cell in &table.cells[0] {
            assert_eq!(cell.increase + cell.tie + cell.decrease, 1);
        }
        // The shift moves privileged rates down and unprivileged up.
        let ki = |m: &str| table.metrics.iter().position(|x| x == m).unwrap();
        assert_eq!(table.cells[0][ki("sr_p")].decrease, 1);
        assert_eq!(table.cells[0][ki("sr_u")].increase, 1);
        assert_eq!(table.cells[0][ki("spd")].decrease, 1);
    }

    #[test]
    fn effect_means_match_constructed_shift() {
        let base: Vec<MetricReport> = vec![
            report(0.5, 0.6, 0.2, 0.3, 0.4, 0.1),
            report(0.6, 0.7, 0.3, 0.4, 0.5, 0.2),
        ];
        let method = shifted(&base, -0.1); // +0.1 on privileged metrics
        let res = results("toy", vec![column("base", base), column("m", method)]);
        let table = effect_table(std::slice::from_ref(&res)).unwrap();
        let ki = |m: &str| table.metrics.iter().position(|x| x == m).unwrap();
        let cell = table.cells[0][ki("sr_p")].unwrap();
        assert!((cell.mean_delta - 0.1).abs() < 1e-12);
        assert!((cell.mean_after - 0.65).abs() < 1e-12);
        assert!((cell.mean_before - 0.55).abs() < 1e-12);
        assert!((cell.extreme_delta - 0.1).abs() < 1e-12);
        assert_eq!(cell.rendered(), "+0.100 (0.650-0.550)");
    }

    #[test]
    fn effect_table_on_identical_method_is_all_zero() {
        let base = base_reports();
        let res = results(
            "toy",
            vec![column("base", base.clone()), column("same", base)],
        );
        let table = effect_table(std::slice::from_ref(&res)).unwrap();
        for cell in table.cells[0].iter().flatten() {
            assert_eq!(cell.mean_delta, 0.0);
            assert_eq!(cell.large_pct, 0.0);
        }
    }

    #[test]
    fn correlation_matrix_catches_duplicates_and_negations() {
        // Three tasks, one method each; sr_p deltas equal tpr_p deltas and
        // negate sr_u deltas by construction of `shifted`.
        let tasks: Vec<RunResults> = (0..3)
            .map(|t| {
                let base = base_reports();
                let method = shifted(&base, 0.05 * (t + 1) as f64);
                results(
                    &format!("task{t}"),
                    vec![column("base", base), column("m", method)],
                )
            })
            .collect();
        let m = correlation_matrix(&tasks).unwrap();
        assert_eq!(m.observations, 3);
        assert_eq!(m.cell("sr_p", "sr_p"), Some(1.0));
        assert!((m.cell("sr_p", "tpr_p").unwrap() - 1.0).abs() < 1e-12);
        assert!((m.cell("sr_p", "sr_u").unwrap() + 1.0).abs() < 1e-12);
        // Symmetry.
        assert_eq!(m.cell("sr_u", "spd"), m.cell("spd", "sr_u"));
    }

    #[test]
    fn correlation_needs_three_observations() {
        let base = base_reports();
        let method = shifted(&base, 0.1);
        let res = results("toy", vec![column("base", base), column("m", method)]);
        assert!(matches!(
            correlation_matrix(std::slice::from_ref(&res)),
            Err(Error::EmptySample(_))
        ));
    }

    #[test]
    fn comparing_a_method_with_itself_ties_everywhere() {
        let base = base_reports();
        let method = shifted(&base, 0.1);
        let res = results(
            "toy",
            vec![column("base", base), column("m", method)],
        );
        let c = compare_methods(
            std::slice::from_ref(&res),
            std::slice::from_ref(&res),
            "m",
            "m",
        )
        .unwrap();
        for row in &c.rows {
            assert_eq!((row.win, row.tie, row.loss), (0, 1, 0), "{}", row.metric);
        }
        assert_eq!(c.mean_overall_sr_delta, 0.0);
    }

    #[test]
    fn mismatched_splits_are_a_hard_error() {
        let base = base_reports();
        let method = shifted(&base, 0.1);
        let a = results(
            "toy",
            vec![column("base", base.clone()), column("m", method.clone())],
        );
        let mut b = results("toy", vec![column("base", base), column("m", method)]);
        b.methods[1].records[3].split_id = "elsewhere".into();
        assert!(matches!(
            compare_methods(
                std::slice::from_ref(&a),
                std::slice::from_ref(&b),
                "m",
                "m"
            ),
            Err(Error::SplitMismatch(_))
        ));
    }

    #[test]
    fn unknown_method_name_is_a_config_error() {
        let base = base_reports();
        let res = results("toy", vec![column("base", base)]);
        assert!(matches!(
            compare_methods(
                std::slice::from_ref(&res),
                std::slice::from_ref(&res),
                "nope",
                "base"
            ),
            Err(Error::Config(_))
        ));
    }
}
