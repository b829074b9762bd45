//! Randomized invariants: properties that must hold for every input, not
//! just the fixtures the unit tests pin. Each property states a law of the
//! public API — bounds, symmetries, conservation, replay — and lets the
//! framework hunt for counterexamples.

use proptest::prelude::*;

use fairaudit::data::{split_train_indices, SplitConfig};
use fairaudit::metrics::{build_report, PredictionSet};
use fairaudit::mitigation::{reweigh_from_parts, selective_apply, SelectiveScope};
use fairaudit::stats::{
    classify_impact, cliffs_delta, mann_whitney_u, spearman, Direction,
};

const TOL: f64 = 1e-12;

/// Random labeled predictions over `2..=4` groups; groups may be empty or
/// single-class so the undefined-rate paths get exercised too.
fn labeled_rows() -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<usize>, usize)> {
    (2..=4usize).prop_flat_map(|k| {
        prop::collection::vec((0..=1u8, 0..=1u8, 0..k), 1..80)
            .prop_map(move |rows| {
                let y_true = rows.iter().map(|r| r.0).collect();
                let y_pred = rows.iter().map(|r| r.1).collect();
                let groups = rows.iter().map(|r| r.2).collect();
                (y_true, y_pred, groups, k)
            })
    })
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..25)
}

/// Integer-valued samples produce heavy ties, covering the tie-corrected
/// branches of the rank statistics.
fn tied_sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0..5i32).prop_map(f64::from), 1..25)
}

fn either_sample() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![sample(), tied_sample()]
}

/// Two samples of one shared length, continuous or tie-heavy.
fn paired_samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3..25usize).prop_flat_map(|n| {
        let values = move || {
            prop_oneof![
                prop::collection::vec(-50.0f64..50.0, n),
                prop::collection::vec((0..5i32).prop_map(f64::from), n),
            ]
        };
        (values(), values())
    })
}

proptest! {
    #[test]
    fn report_values_stay_in_bounds((y_true, y_pred, groups, k) in labeled_rows()) {
        let n = y_true.len();
        let p = PredictionSet::new(y_true, y_pred, vec![0.5; n], groups, 0).unwrap();
        let report = build_report(&p, k).unwrap();
        for rates in &report.rates.per_group {
            for rate in [rates.sr, rates.tpr, rates.fpr].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&rate), "rate {rate} out of [0,1]");
            }
        }
        for gap in [report.fairness.spd, report.fairness.eod, report.fairness.aod]
            .into_iter()
            .flatten()
        {
            prop_assert!((0.0..=1.0).contains(&gap), "gap {gap} out of [0,1]");
        }
        let perf = &report.performance;
        for v in [perf.accuracy, perf.macro_precision, perf.macro_recall, perf.macro_f1] {
            prop_assert!((0.0..=1.0).contains(&v), "performance value {v} out of [0,1]");
        }
        prop_assert!(perf.mcc.abs() <= 1.0 + TOL, "mcc {} out of [-1,1]", perf.mcc);
        prop_assert!((0.0..=1.0).contains(&report.overall_sr));
    }

    #[test]
    fn overall_rate_is_the_group_weighted_mean((y_true, y_pred, groups, k) in labeled_rows()) {
        let n = y_true.len();
        let p = PredictionSet::new(y_true, y_pred, vec![0.5; n], groups.clone(), 0).unwrap();
        let report = build_report(&p, k).unwrap();
        let mut weighted = 0.0;
        for g in 0..k {
            let size = groups.iter().filter(|&&x| x == g).count();
            if size > 0 {
                let sr = report.rates.per_group[g].sr.expect("non-empty group has an SR");
                weighted += sr * size as f64;
            }
        }
        prop_assert!(
            (report.overall_sr - weighted / n as f64).abs() <= TOL,
            "overall SR {} is not the size-weighted group mean {}",
            report.overall_sr,
            weighted / n as f64
        );
    }

    #[test]
    fn reweighing_conserves_mass_and_factorizes(
        cells in prop::collection::vec((1..12usize, 1..12usize), 2..5)
    ) {
        // One (positive, negative) count per group, all cells occupied by
        // construction.
        let k = cells.len();
        let mut group_of = Vec::new();
        let mut labels = Vec::new();
        for (g, &(neg, pos)) in cells.iter().enumerate() {
            for _ in 0..neg {
                group_of.push(g);
                labels.push(0u8);
            }
            for _ in 0..pos {
                group_of.push(g);
                labels.push(1u8);
            }
        }
        let n = labels.len();
        let plan = reweigh_from_parts(&group_of, &labels, k).unwrap();
        prop_assert!(plan.flags.is_empty());
        prop_assert!(plan.weights.iter().all(|&w| w > 0.0));
        let total: f64 = plan.weights.iter().sum();
        prop_assert!(
            (total - n as f64).abs() <= 1e-9 * n as f64,
            "weights sum to {total}, expected the row count {n}"
        );
        let mut joint = vec![[0.0f64; 2]; k];
        let mut by_group = vec![0.0f64; k];
        let mut by_label = [0.0f64; 2];
        for i in 0..n {
            joint[group_of[i]][labels[i] as usize] += plan.weights[i];
            by_group[group_of[i]] += plan.weights[i];
            by_label[labels[i] as usize] += plan.weights[i];
        }
        for g in 0..k {
            for l in 0..2 {
                let lhs = joint[g][l] / total;
                let rhs = (by_group[g] / total) * (by_label[l] / total);
                prop_assert!((lhs - rhs).abs() <= TOL);
            }
        }
    }

    #[test]
    fn mann_whitney_p_is_a_symmetric_probability(a in either_sample(), b in either_sample()) {
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab.p_value), "p = {}", ab.p_value);
        prop_assert_eq!(ab.p_value, ba.p_value, "p must not depend on argument order");
        let nm = (a.len() * b.len()) as f64;
        prop_assert!(
            (ab.statistic + ba.statistic - nm).abs() <= TOL * nm.max(1.0),
            "U statistics must sum to n*m: {} + {} != {nm}",
            ab.statistic,
            ba.statistic
        );
    }

    #[test]
    fn cliffs_delta_is_bounded_and_antisymmetric(a in either_sample(), b in either_sample()) {
        let ab = cliffs_delta(&a, &b).unwrap();
        let ba = cliffs_delta(&b, &a).unwrap();
        prop_assert!(ab.abs() <= 1.0);
        prop_assert_eq!(ab, -ba, "delta must flip sign when the samples swap");
    }

    #[test]
    fn cliffs_delta_saturates_on_separated_samples(
        a in prop::collection::vec(10.0f64..20.0, 1..15),
        b in prop::collection::vec(-20.0f64..-10.0, 1..15)
    ) {
        prop_assert_eq!(cliffs_delta(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn spearman_is_bounded_and_perfect_on_monotone_copies(x in sample()) {
        prop_assume!(x.len() >= 3);
        prop_assume!(x.iter().any(|&v| v != x[0]));
        let with_self = spearman(&x, &x).unwrap();
        prop_assert!((with_self.statistic - 1.0).abs() <= TOL);
        let negated: Vec<f64> = x.iter().map(|&v| -v).collect();
        let with_neg = spearman(&x, &negated).unwrap();
        prop_assert!((with_neg.statistic + 1.0).abs() <= TOL);
    }

    #[test]
    fn spearman_stays_in_range((x, y) in paired_samples()) {
        if let Ok(r) = spearman(&x, &y) {
            prop_assert!(r.statistic.abs() <= 1.0 + 1e-9, "rho = {}", r.statistic);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }

    #[test]
    fn impact_verdicts_are_internally_consistent(
        before in sample(),
        after in sample()
    ) {
        let verdict = classify_impact(&before, &after).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let diff = mean(&after) - mean(&before);
        match verdict.direction {
            Direction::Increase => {
                prop_assert!(verdict.p_value < 0.05);
                prop_assert!(diff > 0.0);
            }
            Direction::Decrease => {
                prop_assert!(verdict.p_value < 0.05);
                prop_assert!(diff < 0.0);
            }
            Direction::Tie => {
                prop_assert!(verdict.p_value >= 0.05 || diff == 0.0);
            }
        }
        prop_assert_eq!(verdict.delta, cliffs_delta(&after, &before).unwrap());
        prop_assert_eq!(verdict.large, verdict.delta.abs() >= 0.428);
    }

    #[test]
    fn selective_merge_takes_each_row_from_its_scope(
        (y_true, base_pred, groups, k) in labeled_rows(),
        flips in prop::collection::vec(any::<bool>(), 1..80),
        scope_bits in prop::collection::vec(any::<bool>(), 4)
    ) {
        let n = y_true.len();
        // A mitigated set that differs from the baseline on flipped rows.
        let mit_pred: Vec<u8> = base_pred
            .iter()
            .zip(flips.iter().cycle())
            .map(|(&p, &f)| if f { 1 - p } else { p })
            .collect();
        let base = PredictionSet::new(
            y_true.clone(),
            base_pred,
            vec![0.25; n],
            groups.clone(),
            0,
        )
        .unwrap();
        let mitigated =
            PredictionSet::new(y_true, mit_pred, vec![0.75; n], groups.clone(), 0).unwrap();
        let mut targets: Vec<usize> =
            (0..k).filter(|&g| scope_bits[g]).collect();
        if targets.is_empty() {
            targets.push(0);
        }
        let merged =
            selective_apply(&base, &mitigated, k, &SelectiveScope::new(targets.clone())).unwrap();
        for i in 0..n {
            if targets.contains(&groups[i]) {
                prop_assert_eq!(merged.y_pred[i], mitigated.y_pred[i]);
                prop_assert_eq!(merged.y_prob[i].to_bits(), mitigated.y_prob[i].to_bits());
            } else {
                prop_assert_eq!(merged.y_pred[i], base.y_pred[i]);
                prop_assert_eq!(merged.y_prob[i].to_bits(), base.y_prob[i].to_bits());
            }
        }
    }

    #[test]
    fn split_indices_partition_the_rows_and_replay(
        n in 3..200usize,
        frac in 0.2f64..=0.8,
        seed in any::<u64>()
    ) {
        let cfg = SplitConfig { train_fraction: frac, seed };
        let train = split_train_indices(n, &cfg).unwrap();
        prop_assert_eq!(train.len(), (frac * n as f64).round() as usize);
        prop_assert!(!train.is_empty() && train.len() < n, "both sides must be non-empty");
        prop_assert!(train.windows(2).all(|w| w[0] < w[1]), "sorted and duplicate-free");
        prop_assert!(train.iter().all(|&i| i < n), "indices stay in range");
        let replay = split_train_indices(n, &cfg).unwrap();
        prop_assert_eq!(train, replay, "the same seed must reproduce the same split");
    }
}
