//! Oracle equivalence for the metrics and statistical behavior of the
//! randomization test.

use molfuse::eval::{binary_detection_eval, micro_prf, randomization_test};
use molfuse::label::Label;
use molfuse::tensor::EngineRng;

/// Independent recomputation: walk the instances with plain conditionals
/// instead of a confusion matrix.
fn brute_force_prf(gold: &[Label], pred: &[Label]) -> (f64, f64, f64, f64) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut correct = 0usize;
    for (&g, &p) in gold.iter().zip(pred) {
        if g == p {
            correct += 1;
        }
        if p.is_positive() && g == p {
            tp += 1;
        }
        if p.is_positive() && g != p {
            fp += 1;
        }
        if g.is_positive() && g != p {
            fn_ += 1;
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f, correct as f64 / gold.len() as f64)
}

fn random_labels(rng: &mut EngineRng, n: usize) -> Vec<Label> {
    (0..n)
        .map(|_| Label::from_index(rng.index(5)).expect("index < 5"))
        .collect()
}

#[test]
fn micro_prf_matches_brute_force_on_1000_random_cases() {
    let mut rng = EngineRng::from_seed(20240601);
    for case in 0..1000 {
        let n = 1 + rng.index(40);
        let gold = random_labels(&mut rng, n);
        let pred = random_labels(&mut rng, n);
        let report = micro_prf(&gold, &pred).unwrap();
        let (p, r, f, acc) = brute_force_prf(&gold, &pred);
        assert_eq!(report.micro_p, p, "case {case}: precision");
        assert_eq!(report.micro_r, r, "case {case}: recall");
        assert_eq!(report.micro_f, f, "case {case}: f");
        assert_eq!(report.accuracy, acc, "case {case}: accuracy");
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, n, "case {case}: confusion totals");
    }
}

/// Gold distribution shaped like the shared-task test split: 302 + 360 +
/// 221 + 96 positives and 4737 negatives (5716 total).
fn task_test_distribution() -> Vec<Label> {
    let mut gold = Vec::with_capacity(5716);
    gold.extend(std::iter::repeat(Label::Mechanism).take(302));
    gold.extend(std::iter::repeat(Label::Effect).take(360));
    gold.extend(std::iter::repeat(Label::Advice).take(221));
    gold.extend(std::iter::repeat(Label::Int).take(96));
    gold.extend(std::iter::repeat(Label::Negative).take(4737));
    gold
}

#[test]
fn always_positive_baseline_arithmetic() {
    let gold = task_test_distribution();
    let report = binary_detection_eval(&gold, &vec![true; gold.len()]).unwrap();
    assert!((report.recall - 1.0).abs() < 1e-9);
    assert!((report.precision - 979.0 / 5716.0).abs() < 1e-9);
}

#[test]
fn always_negative_baseline_arithmetic() {
    let gold = task_test_distribution();
    let report = binary_detection_eval(&gold, &vec![false; gold.len()]).unwrap();
    assert!((report.accuracy - 4737.0 / 5716.0).abs() < 1e-9);
    assert_eq!(report.recall, 0.0);
    assert_eq!(report.f, 0.0);
}

#[test]
fn perfect_binary_detector_scores_one() {
    let gold = task_test_distribution();
    let pred: Vec<bool> = gold.iter().map(|g| g.is_positive()).collect();
    let report = binary_detection_eval(&gold, &pred).unwrap();
    assert_eq!(report.precision, 1.0);
    assert_eq!(report.recall, 1.0);
    assert_eq!(report.f, 1.0);
    assert_eq!(report.accuracy, 1.0);
}

#[test]
fn perfect_vs_trivial_system_is_significant() {
    let mut gold = vec![Label::Mechanism; 50];
    gold.extend(vec![Label::Negative; 50]);
    let perfect = gold.clone();
    let trivial = vec![Label::Negative; 100];
    let p = randomization_test(&gold, &perfect, &trivial, 9999, 7).unwrap();
    assert!(p < 0.005, "p = {p}");
}

/// Duplicating the dataset (same per-instance outcomes twice) must not make
/// the test less significant on average.
#[test]
fn duplication_does_not_raise_p_on_average() {
    // A modest but consistent advantage for system A.
    let mut gold = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..30 {
        gold.push(if i % 2 == 0 { Label::Effect } else { Label::Negative });
        a.push(gold[i]);
        b.push(if i % 5 == 0 { gold[i] } else { Label::Negative });
    }
    let double = |v: &Vec<Label>| {
        let mut out = v.clone();
        out.extend(v.iter().copied());
        out
    };
    let (gold2, a2, b2) = (double(&gold), double(&a), double(&b));

    let mut single_sum = 0.0;
    let mut double_sum = 0.0;
    for seed in 0..20 {
        single_sum += randomization_test(&gold, &a, &b, 499, seed).unwrap();
        double_sum += randomization_test(&gold2, &a2, &b2, 499, seed).unwrap();
    }
    assert!(
        double_sum <= single_sum,
        "doubling weakened significance: {double_sum} > {single_sum}"
    );
}
