//! Nonparametric statistics used to judge whether a mitigation method
//! actually changed a metric: the two-sided Mann-Whitney U test, Cliff's
//! delta effect size, Spearman rank correlation, and the verdict rules
//! (significant increase / tie / decrease, win / tie / loss) built on them.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Significance threshold shared by every verdict rule.
pub const ALPHA: f64 = 0.05;
/// |Cliff's delta| at or above this counts as a large effect.
pub const LARGE_DELTA: f64 = 0.428;
/// Largest pooled sample for which the exact U distribution is enumerated.
const EXACT_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("no NaN in ranks"));
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean of (i+1)..=(j+1)
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn has_ties(a: &[f64], b: &[f64]) -> bool {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(|x, y| x.partial_cmp(y).expect("no NaN"));
    pooled.windows(2).any(|w| w[0] == w[1])
}

/// U statistic of the first sample, doubled so ties contribute an integer.
/// Only used on tie-free data where it is exactly 2 * (number of pairs won).
fn u_doubled(a: &[f64], b: &[f64]) -> u64 {
    let mut twice = 0u64;
    for x in a {
        for y in b {
            if x > y {
                twice += 2;
            } else if x == y {
                twice += 1;
            }
        }
    }
    twice
}

/// Two-sided Mann-Whitney U test. For pooled samples of at most 16 tie-free
/// values the p-value is exact, from full enumeration of the permutation
/// distribution; otherwise the normal approximation with tie correction and
/// continuity correction is used. The reported statistic is the first
/// sample's U.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample(
            "mann-whitney needs two non-empty samples".into(),
        ));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::ConstantInput("sample contains NaN".into()));
    }
    let n_a = a.len();
    let n_b = b.len();
    let n = n_a + n_b;

    if n <= EXACT_LIMIT && !has_ties(a, b) {
        // Enumerate every way the pooled values could have been assigned to
        // the first sample; p is the share of assignments at least as
        // extreme (in |U - mean|) as observed. All quantities are integers
        // once doubled, so the comparison is exact.
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let u_obs = u_doubled(a, b);
        let mean_doubled = (n_a * n_b) as u64; // 2 * (n_a n_b / 2)
        let observed_dev = u_obs.abs_diff(mean_doubled);

        let mut extreme = 0u64;
        let mut total = 0u64;
        for mask in 0u32..(1u32 << n) {
            if mask.count_ones() as usize != n_a {
                continue;
            }
            total += 1;
            let mut u = 0u64;
            for i in 0..n {
                if mask & (1 << i) == 0 {
                    continue;
                }
                for j in 0..n {
                    if mask & (1 << j) != 0 {
                        continue;
                    }
                    if pooled[i] > pooled[j] {
                        u += 2;
                    }
                }
            }
            if u.abs_diff(mean_doubled) >= observed_dev {
                extreme += 1;
            }
        }
        return Ok(TestResult {
            statistic: u_obs as f64 / 2.0,
            p_value: extreme as f64 / total as f64,
        });
    }

    // Normal approximation on average ranks.
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    let rank_sum_a: f64 = ranks[..n_a].iter().sum();
    let u_a = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let mu = (n_a * n_b) as f64 / 2.0;

    // Tie correction: sum of t^3 - t over tie groups.
    let mut sorted = pooled.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("no NaN"));
    let mut tie_term = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let nf = n as f64;
    let variance =
        (n_a * n_b) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if variance <= 0.0 {
        // Every pooled value identical: no evidence of any difference.
        return Ok(TestResult {
            statistic: u_a,
            p_value: 1.0,
        });
    }
    let u_big = u_a.max((n_a * n_b) as f64 - u_a);
    let z = (u_big - mu - 0.5) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = (2.0 * (1.0 - normal.cdf(z))).clamp(0.0, 1.0);
    Ok(TestResult {
        statistic: u_a,
        p_value: p,
    })
}

/// Cliff's delta: (wins - losses) / all pairs, in [-1, 1]. Positive values
/// mean the first sample tends to exceed the second.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample(
            "cliff's delta needs two non-empty samples".into(),
        ));
    }
    let mut gt = 0i64;
    let mut lt = 0i64;
    for x in a {
        for y in b {
            if x > y {
                gt += 1;
            } else if x < y {
                lt += 1;
            }
        }
    }
    Ok((gt - lt) as f64 / (a.len() * b.len()) as f64)
}

/// Spearman rank correlation with average ranks for ties; the p-value uses
/// the t approximation t = rho * sqrt((n-2) / (1 - rho^2)) with n-2 degrees
/// of freedom, and |rho| = 1 maps to p = 0.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "spearman inputs of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::EmptySample(format!(
            "spearman needs at least 3 paired observations, got {n}"
        )));
    }
    let constant = |v: &[f64]| v.iter().all(|e| e == &v[0]);
    if constant(x) || constant(y) {
        return Err(Error::ConstantInput(
            "spearman is undefined when either series is constant".into(),
        ));
    }

    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let nf = n as f64;
    let mean = (nf + 1.0) / 2.0; // mean of 1..n, also the mean of average ranks
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..n {
        let dx = rx[i] - mean;
        let dy = ry[i] - mean;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    let rho = (cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0);

    let one_minus_r2 = 1.0 - rho * rho;
    let p = if one_minus_r2 <= f64::EPSILON {
        0.0
    } else {
        let t = rho * ((nf - 2.0) / one_minus_r2).sqrt();
        let dist = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map_err(|e| Error::Internal(format!("t distribution: {e}")))?;
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(TestResult {
        statistic: rho,
        p_value: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increase,
    Decrease,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactVerdict {
    pub direction: Direction,
    pub p_value: f64,
    /// Cliff's delta of after versus before.
    pub delta: f64,
    pub large: bool,
}

/// Classifies how a metric moved between two samples of runs: a tie unless
/// the Mann-Whitney test is significant at 0.05, otherwise the direction of
/// the mean change, with Cliff's delta (after vs before) as effect size.
pub fn classify_impact(before: &[f64], after: &[f64]) -> Result<ImpactVerdict> {
    let test = mann_whitney_u(before, after)?;
    let delta = cliffs_delta(after, before)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let direction = if test.p_value >= ALPHA {
        Direction::Tie
    } else {
        let diff = mean(after) - mean(before);
        if diff > 0.0 {
            Direction::Increase
        } else if diff < 0.0 {
            Direction::Decrease
        } else {
            Direction::Tie
        }
    };
    Ok(ImpactVerdict {
        direction,
        p_value: test.p_value,
        delta,
        large: delta.abs() >= LARGE_DELTA,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

/// Which direction is an improvement for a named metric. Selection and
/// true-positive rates, accuracy-family scores, and MCC improve upward;
/// false-positive rates and all fairness gaps improve downward.
pub fn metric_orientation(name: &str) -> Option<Orientation> {
    let base = name.split(['_']).next().unwrap_or(name);
    match base {
        "sr" | "tpr" | "overall" | "accuracy" | "macro" | "mcc" => Some(Orientation::HigherBetter),
        "fpr" | "spd" | "eod" | "aod" => Some(Orientation::LowerBetter),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Win,
    Tie,
    Loss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WtlVerdict {
    pub outcome: Outcome,
    pub p_value: f64,
}

/// Win/tie/loss of a candidate against a reference: a tie unless the
/// Mann-Whitney test is significant, otherwise win or loss according to the
/// mean difference read under the metric's orientation.
pub fn win_tie_loss(
    candidate: &[f64],
    reference: &[f64],
    orientation: Orientation,
) -> Result<WtlVerdict> {
    let test = mann_whitney_u(candidate, reference)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let outcome = if test.p_value >= ALPHA {
        Outcome::Tie
    } else {
        let diff = mean(candidate) - mean(reference);
        let better = match orientation {
            Orientation::HigherBetter => diff > 0.0,
            Orientation::LowerBetter => diff < 0.0,
        };
        if diff == 0.0 {
            Outcome::Tie
        } else if better {
            Outcome::Win
        } else {
            Outcome::Loss
        }
    };
    Ok(WtlVerdict {
        outcome,
        p_value: test.p_value,
    })
}
