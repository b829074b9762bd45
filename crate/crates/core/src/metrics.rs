//! Group-disaggregated benefit rates, the fairness gaps derived from them,
//! and overall performance scores.
//!
//! Per demographic group the toolkit tracks three rates:
//! selection rate `SR = P(pred=1 | group)`, true-positive rate
//! `TPR = P(pred=1 | group, y=1)`, and false-positive rate
//! `FPR = P(pred=1 | group, y=0)`. A rate whose denominator is empty is
//! reported as absent rather than invented, with a flag naming the gap.
//!
//! Fairness gaps between a privileged group P and an unprivileged group U:
//! `SPD = |SR_P - SR_U|`, `EOD = |TPR_P - TPR_U|`, and
//! `AOD = |((TPR_P - TPR_U) + (FPR_P - FPR_U)) / 2|` — the inner sum is
//! signed, so opposite-sign gaps may cancel before the absolute value.
//! With more than two groups each gap generalizes to the worst disparity:
//! max-minus-min for SR and TPR, and the largest pairwise AOD.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predictions for a set of evaluated instances, tagged with each
/// instance's demographic group and the experiment run they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub y_true: Vec<u8>,
    pub y_pred: Vec<u8>,
    pub y_prob: Vec<f64>,
    pub group_of: Vec<usize>,
    pub run_id: usize,
}

impl PredictionSet {
    pub fn new(
        y_true: Vec<u8>,
        y_pred: Vec<u8>,
        y_prob: Vec<f64>,
        group_of: Vec<usize>,
        run_id: usize,
    ) -> Result<PredictionSet> {
        let n = y_true.len();
        if n == 0 {
            return Err(Error::EmptySample("prediction set has no instances".into()));
        }
        if y_pred.len() != n || y_prob.len() != n || group_of.len() != n {
            return Err(Error::LengthMismatch(format!(
                "y_true {n}, y_pred {}, y_prob {}, group_of {}",
                y_pred.len(),
                y_prob.len(),
                group_of.len()
            )));
        }
        if y_true.iter().chain(&y_pred).any(|&v| v > 1) {
            return Err(Error::ScoreFile("labels must be 0 or 1".into()));
        }
        if y_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::ScoreFile(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(PredictionSet {
            y_true,
            y_pred,
            y_prob,
            group_of,
            run_id,
        })
    }

    pub fn len(&self) -> usize {
        self.y_true.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_true.is_empty()
    }

    /// Fraction of all instances predicted favorable.
    pub fn overall_selection_rate(&self) -> f64 {
        self.y_pred.iter().map(|&p| f64::from(p)).sum::<f64>() / self.len() as f64
    }
}

/// The three benefit rates of one group; `None` marks an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub sr: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    /// Indexed by group id (rank order).
    pub per_group: Vec<RateSet>,
    pub flags: Vec<String>,
}

/// Computes SR/TPR/FPR for each of `n_groups` groups. Groups with no
/// instances, no positives, or no negatives get the corresponding rate(s)
/// absent and a flag naming the hole.
pub fn group_rates(p: &PredictionSet, n_groups: usize) -> Result<GroupRates> {
    if n_groups == 0 {
        return Err(Error::InsufficientGroups("zero groups requested".into()));
    }
    if let Some(&g) = p.group_of.iter().find(|&&g| g >= n_groups) {
        return Err(Error::MissingGroup(format!(
            "instance carries group id {g} but only {n_groups} groups exist"
        )));
    }
    let mut total = vec![0usize; n_groups];
    let mut selected = vec![0usize; n_groups];
    let mut positives = vec![0usize; n_groups];
    let mut true_pos = vec![0usize; n_groups];
    let mut negatives = vec![0usize; n_groups];
    let mut false_pos = vec![0usize; n_groups];
    for i in 0..p.len() {
        let g = p.group_of[i];
        total[g] += 1;
        if p.y_pred[i] == 1 {
            selected[g] += 1;
        }
        if p.y_true[i] == 1 {
            positives[g] += 1;
            if p.y_pred[i] == 1 {
                true_pos[g] += 1;
            }
        } else {
            negatives[g] += 1;
            if p.y_pred[i] == 1 {
                false_pos[g] += 1;
            }
        }
    }

    let mut per_group = Vec::with_capacity(n_groups);
    let mut flags = Vec::new();
    for g in 0..n_groups {
        let sr = if total[g] > 0 {
            Some(selected[g] as f64 / total[g] as f64)
        } else {
            flags.push(format!("group {g}: no instances; all rates undefined"));
            None
        };
        let tpr = if positives[g] > 0 {
            Some(true_pos[g] as f64 / positives[g] as f64)
        } else {
            if total[g] > 0 {
                flags.push(format!("group {g}: no positive instances; tpr undefined"));
            }
            None
        };
        let fpr = if negatives[g] > 0 {
            Some(false_pos[g] as f64 / negatives[g] as f64)
        } else {
            if total[g] > 0 {
                flags.push(format!("group {g}: no negative instances; fpr undefined"));
            }
            None
        };
        per_group.push(RateSet { sr, tpr, fpr });
    }
    Ok(GroupRates { per_group, flags })
}

fn two_groups(r: &GroupRates) -> Result<(&RateSet, &RateSet)> {
    if r.per_group.len() != 2 {
        return Err(Error::InsufficientGroups(format!(
            "this gap is defined for exactly two groups, got {}",
            r.per_group.len()
        )));
    }
    Ok((&r.per_group[0], &r.per_group[1]))
}

fn require(rate: Option<f64>, what: &str) -> Result<f64> {
    rate.ok_or_else(|| Error::UndefinedRate(what.to_string()))
}

/// Statistical parity difference between the privileged (first) and
/// unprivileged (second) group.
pub fn spd(r: &GroupRates) -> Result<f64> {
    let (p, u) = two_groups(r)?;
    Ok((require(p.sr, "privileged sr")? - require(u.sr, "unprivileged sr")?).abs())
}

/// Equal opportunity difference (TPR gap).
pub fn eod(r: &GroupRates) -> Result<f64> {
    let (p, u) = two_groups(r)?;
    Ok((require(p.tpr, "privileged tpr")? - require(u.tpr, "unprivileged tpr")?).abs())
}

/// Average odds difference; the TPR and FPR gaps are averaged with sign
/// before taking the absolute value.
pub fn aod(r: &GroupRates) -> Result<f64> {
    let (p, u) = two_groups(r)?;
    let tpr_gap = require(p.tpr, "privileged tpr")? - require(u.tpr, "unprivileged tpr")?;
    let fpr_gap = require(p.fpr, "privileged fpr")? - require(u.fpr, "unprivileged fpr")?;
    Ok((0.5 * (tpr_gap + fpr_gap)).abs())
}

/// Fairness gaps for any number of groups; a component is absent (and
/// flagged) when fewer than two groups have the rates it needs. For exactly
/// two fully-defined groups each component equals its two-group form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessScores {
    pub spd: Option<f64>,
    pub eod: Option<f64>,
    pub aod: Option<f64>,
    pub flags: Vec<String>,
}

pub fn multi_fairness(r: &GroupRates) -> Result<FairnessScores> {
    if r.per_group.len() < 2 {
        return Err(Error::InsufficientGroups(format!(
            "fairness gaps need at least two groups, got {}",
            r.per_group.len()
        )));
    }
    let mut flags = Vec::new();

    let spread = |pick: fn(&RateSet) -> Option<f64>, name: &str, flags: &mut Vec<String>| {
        let defined: Vec<f64> = r.per_group.iter().filter_map(pick).collect();
        if defined.len() < r.per_group.len() {
            flags.push(format!(
                "{name}: {} of {} groups lack the rate; they are excluded",
                r.per_group.len() - defined.len(),
                r.per_group.len()
            ));
        }
        if defined.len() < 2 {
            flags.push(format!("{name}: fewer than two groups defined; absent"));
            return None;
        }
        let max = defined.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = defined.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(max - min)
    };
    let spd = spread(|g| g.sr, "spd", &mut flags);
    let eod = spread(|g| g.tpr, "eod", &mut flags);

    // AOD: worst pairwise average-odds gap over groups with both rates.
    let both: Vec<(usize, f64, f64)> = r
        .per_group
        .iter()
        .enumerate()
        .filter_map(|(i, g)| match (g.tpr, g.fpr) {
            (Some(t), Some(f)) => Some((i, t, f)),
            _ => None,
        })
        .collect();
    if both.len() < r.per_group.len() {
        flags.push(format!(
            "aod: {} of {} groups lack tpr or fpr; they are excluded",
            r.per_group.len() - both.len(),
            r.per_group.len()
        ));
    }
    let aod = if both.len() < 2 {
        flags.push("aod: fewer than two groups defined; absent".into());
        None
    } else {
        let mut worst = 0.0f64;
        for i in 0..both.len() {
            for j in (i + 1)..both.len() {
                let gap = (0.5 * ((both[i].1 - both[j].1) + (both[i].2 - both[j].2))).abs();
                worst = worst.max(gap);
            }
        }
        Some(worst)
    };

    Ok(FairnessScores {
        spd,
        eod,
        aod,
        flags,
    })
}

/// Overall performance of a prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceScores {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub mcc: f64,
}

/// Accuracy, macro-averaged precision/recall/F1 over both classes (a class
/// with an empty denominator contributes 0), and the Matthews correlation
/// coefficient with the zero-factor convention MCC = 0.
pub fn performance(p: &PredictionSet) -> Result<PerformanceScores> {
    let n = p.len() as f64;
    let mut tp = 0f64;
    let mut tn = 0f64;
    let mut fp = 0f64;
    let mut fn_ = 0f64;
    for i in 0..p.len() {
        match (p.y_true[i], p.y_pred[i]) {
            (1, 1) => tp += 1.0,
            (0, 0) => tn += 1.0,
            (0, 1) => fp += 1.0,
            (1, 0) => fn_ += 1.0,
            _ => unreachable!("labels validated as binary"),
        }
    }
    let accuracy = (tp + tn) / n;

    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    // Per class: class 1 treats predicted-1 as selected; class 0 mirrors.
    let prec1 = ratio(tp, tp + fp);
    let rec1 = ratio(tp, tp + fn_);
    let prec0 = ratio(tn, tn + fn_);
    let rec0 = ratio(tn, tn + fp);
    let f1 = |prec: f64, rec: f64| ratio(2.0 * prec * rec, prec + rec);
    let macro_precision = 0.5 * (prec0 + prec1);
    let macro_recall = 0.5 * (rec0 + rec1);
    let macro_f1 = 0.5 * (f1(prec0, rec0) + f1(prec1, rec1));

    let denom2 = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = if denom2 > 0.0 {
        (tp * tn - fp * fn_) / denom2.sqrt()
    } else {
        0.0
    };

    Ok(PerformanceScores {
        accuracy,
        macro_precision,
        macro_recall,
        macro_f1,
        mcc,
    })
}

/// Everything measured about one prediction set: per-group rates, the
/// fairness gaps, classifier performance, and the overall selection rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rates: GroupRates,
    pub fairness: FairnessScores,
    pub performance: PerformanceScores,
    pub overall_sr: f64,
    pub flags: Vec<String>,
}

/// Computes the full report for a prediction set over `n_groups` groups.
/// Degeneracies (empty groups, undefined rates) surface as flags, never as
/// invented numbers.
pub fn build_report(p: &PredictionSet, n_groups: usize) -> Result<MetricReport> {
    let rates = group_rates(p, n_groups)?;
    let fairness = multi_fairness(&rates)?;
    let performance = performance(p)?;
    let mut flags = rates.flags.clone();
    for f in &fairness.flags {
        if !flags.contains(f) {
            flags.push(f.clone());
        }
    }
    Ok(MetricReport {
        overall_sr: p.overall_selection_rate(),
        rates,
        fairness,
        performance,
        flags,
    })
}

impl MetricReport {
    /// Flat JSON view keyed `sr_<group>`, `tpr_<group>`, `fpr_<group>`,
    /// `spd`, `eod`, `aod`, the performance scores, `overall_sr`, and
    /// `flags`. `labels` names the groups in rank order (`p`/`u` for two
    /// groups); undefined rates are omitted rather than filled in.
    pub fn flat_json(&self, labels: &[String]) -> Result<serde_json::Value> {
        if labels.len() != self.rates.per_group.len() {
            return Err(Error::LengthMismatch(format!(
                "{} group labels for {} groups",
                labels.len(),
                self.rates.per_group.len()
            )));
        }
        let mut map = serde_json::Map::new();
        let mut put = |k: String, v: Option<f64>| {
            if let Some(v) = v {
                map.insert(k, serde_json::json!(v));
            }
        };
        for (label, r) in labels.iter().zip(&self.rates.per_group) {
            put(format!("sr_{label}"), r.sr);
            put(format!("tpr_{label}"), r.tpr);
            put(format!("fpr_{label}"), r.fpr);
        }
        put("spd".into(), self.fairness.spd);
        put("eod".into(), self.fairness.eod);
        put("aod".into(), self.fairness.aod);
        put("accuracy".into(), Some(self.performance.accuracy));
        put("macro_precision".into(), Some(self.performance.macro_precision));
        put("macro_recall".into(), Some(self.performance.macro_recall));
        put("macro_f1".into(), Some(self.performance.macro_f1));
        put("mcc".into(), Some(self.performance.mcc));
        put("overall_sr".into(), Some(self.overall_sr));
        map.insert("flags".into(), serde_json::json!(self.flags));
        Ok(serde_json::Value::Object(map))
    }

    /// Looks a metric up by its flat-JSON key (e.g. `sr_p`, `spd`,
    /// `accuracy`); `None` when the key is unknown for this report or the
    /// value is undefined.
    pub fn metric(&self, key: &str, labels: &[String]) -> Option<f64> {
        if let Some((prefix, label)) = key.split_once('_') {
            if let Some(g) = labels.iter().position(|l| l == label) {
                let r = &self.rates.per_group[g];
                match prefix {
                    "sr" => return r.sr,
                    "tpr" => return r.tpr,
                    "fpr" => return r.fpr,
                    _ => {}
                }
            }
        }
        match key {
            "spd" => self.fairness.spd,
            "eod" => self.fairness.eod,
            "aod" => self.fairness.aod,
            "accuracy" => Some(self.performance.accuracy),
            "macro_precision" => Some(self.performance.macro_precision),
            "macro_recall" => Some(self.performance.macro_recall),
            "macro_f1" => Some(self.performance.macro_f1),
            "mcc" => Some(self.performance.mcc),
            "overall_sr" => Some(self.overall_sr),
            _ => None,
        }
    }
}
