//! Micro-averaged metrics over the four positive interaction types,
//! binary detection metrics, and the approximate randomization test.
//!
//! Micro counting follows the shared-task convention: a positive prediction
//! with the wrong type is both a false positive (for the predicted type)
//! and a false negative (for the gold type).

use thiserror::Error;

use crate::label::Label;
use crate::tensor::EngineRng;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("randomization test needs at least one round")]
    NoRounds,
}

/// Metrics plus the full 5x5 confusion matrix (`confusion[gold][pred]`).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub micro_p: f64,
    pub micro_r: f64,
    pub micro_f: f64,
    /// One-vs-rest F per positive type, in label order
    /// (mechanism, effect, advice, int).
    pub per_type_f: [f64; 4],
    pub accuracy: f64,
    pub confusion: [[usize; 5]; 5],
    pub instances: usize,
}

fn f_score(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Micro precision/recall/F over the positive types, per-type F and accuracy.
pub fn micro_prf(gold: &[Label], pred: &[Label]) -> Result<EvalReport, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut confusion = [[0usize; 5]; 5];
    for (&g, &p) in gold.iter().zip(pred) {
        confusion[g.index()][p.index()] += 1;
    }

    // Pooled counts over the four positive classes.
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for class in Label::POSITIVE.map(Label::index) {
        tp += confusion[class][class];
        let predicted: usize = (0..5).map(|g| confusion[g][class]).sum();
        let actual: usize = (0..5).map(|p| confusion[class][p]).sum();
        fp += predicted - confusion[class][class];
        fn_ += actual - confusion[class][class];
    }
    let micro_p = ratio(tp, tp + fp);
    let micro_r = ratio(tp, tp + fn_);

    let mut per_type_f = [0.0; 4];
    for (slot, class) in Label::POSITIVE.map(Label::index).into_iter().enumerate() {
        let tp_c = confusion[class][class];
        let predicted: usize = (0..5).map(|g| confusion[g][class]).sum();
        let actual: usize = (0..5).map(|p| confusion[class][p]).sum();
        per_type_f[slot] = f_score(ratio(tp_c, predicted), ratio(tp_c, actual));
    }

    let correct: usize = (0..5).map(|c| confusion[c][c]).sum();
    Ok(EvalReport {
        micro_p,
        micro_r,
        micro_f: f_score(micro_p, micro_r),
        per_type_f,
        accuracy: ratio(correct, gold.len()),
        confusion,
        instances: gold.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryReport {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub accuracy: f64,
}

/// Collapse the four positive gold types to "interacting" and score a
/// binary detector.
pub fn binary_detection_eval(
    gold: &[Label],
    pred_positive: &[bool],
) -> Result<BinaryReport, EvalError> {
    if gold.len() != pred_positive.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred_positive.len(),
        });
    }
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    let mut tn = 0;
    for (&g, &p) in gold.iter().zip(pred_positive) {
        match (g.is_positive(), p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Ok(BinaryReport {
        precision,
        recall,
        f: f_score(precision, recall),
        accuracy: ratio(tp + tn, gold.len()),
    })
}

/// Approximate randomization over micro-F: the observed statistic is
/// |F(A) - F(B)|; each round swaps the two systems' predictions per
/// instance with probability one half, and the p-value is
/// (rounds with a statistic at least as large + 1) / (rounds + 1),
/// so it can never be zero.
pub fn randomization_test(
    gold: &[Label],
    pred_a: &[Label],
    pred_b: &[Label],
    rounds: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    if gold.len() != pred_a.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred_a.len(),
        });
    }
    if gold.len() != pred_b.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred_b.len(),
        });
    }
    if rounds == 0 {
        return Err(EvalError::NoRounds);
    }
    let statistic = |a: &[Label], b: &[Label]| -> f64 {
        let fa = micro_prf(gold, a).expect("lengths checked").micro_f;
        let fb = micro_prf(gold, b).expect("lengths checked").micro_f;
        (fa - fb).abs()
    };
    let observed = statistic(pred_a, pred_b);

    let mut rng = EngineRng::derive(seed, "randomization-test", 0);
    let mut hits = 0usize;
    let mut swapped_a = pred_a.to_vec();
    let mut swapped_b = pred_b.to_vec();
    for _ in 0..rounds {
        for i in 0..gold.len() {
            if rng.coin() {
                swapped_a[i] = pred_b[i];
                swapped_b[i] = pred_a[i];
            } else {
                swapped_a[i] = pred_a[i];
                swapped_b[i] = pred_b[i];
            }
        }
        if statistic(&swapped_a, &swapped_b) >= observed {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (rounds + 1) as f64)
}

/// Human- and machine-readable report block, stable across runs.
pub fn format_report(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("instances\t{}\n", report.instances));
    out.push_str(&format!("micro_precision\t{:.6}\n", report.micro_p));
    out.push_str(&format!("micro_recall\t{:.6}\n", report.micro_r));
    out.push_str(&format!("micro_f\t{:.6}\n", report.micro_f));
    out.push_str(&format!("accuracy\t{:.6}\n", report.accuracy));
    for (slot, label) in Label::POSITIVE.into_iter().enumerate() {
        out.push_str(&format!("f_{}\t{:.6}\n", label.as_str(), report.per_type_f[slot]));
    }
    out.push_str("confusion\tgold\\pred");
    for label in Label::ALL {
        out.push_str(&format!("\t{}", label.as_str()));
    }
    out.push('\n');
    for (g, row) in report.confusion.iter().enumerate() {
        out.push_str(&format!("confusion\t{}", Label::ALL[g].as_str()));
        for count in row {
            out.push_str(&format!("\t{count}"));
        }
        out.push('\n');
    }
    out
}

pub fn format_binary_report(report: &BinaryReport) -> String {
    format!(
        "binary_precision\t{:.6}\nbinary_recall\t{:.6}\nbinary_f\t{:.6}\nbinary_accuracy\t{:.6}\n",
        report.precision, report.recall, report.f, report.accuracy
    )
}
