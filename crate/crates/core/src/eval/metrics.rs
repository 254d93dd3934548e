//! Confusion matrices under the per-scenario one-vs-rest rule, derived
//! metrics, threshold sweeps and macro averages.

use serde::{Deserialize, Serialize};

use super::{EvalError, TrialRecord};
use crate::scenario::{GestureClass, ScenarioGesture};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
}

/// Whether `r` is a positive prediction of `g` at threshold `delta`.
#[inline]
pub fn is_positive(r: &TrialRecord, g: GestureClass, delta: f64) -> bool {
    r.predicted == g && r.confidence as f64 >= delta
}

fn check_sg(sg: ScenarioGesture) -> Result<(), EvalError> {
    if sg.scenario.admits(sg.gesture) {
        Ok(())
    } else {
        Err(EvalError::UnknownSg(sg))
    }
}

/// Counts TP/FN over the target pair's own trials and FP/TN over the
/// trials of the other gestures in the same scenario.
pub fn confusion_at(records: &[TrialRecord], sg: ScenarioGesture, delta: f64) -> Result<ConfusionMatrix, EvalError> {
    check_sg(sg)?;
    let mut cm = ConfusionMatrix::default();
    for r in records.iter().filter(|r| r.scenario == sg.scenario) {
        let pos = is_positive(r, sg.gesture, delta);
        match (r.truth == sg.gesture, pos) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Precision is 1 when nothing is predicted positive; F1 is 0 when
/// precision and recall are both 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    if cm.positives() == 0 {
        return Err(EvalError::EmptyPositives);
    }
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let precision = if cm.tp + cm.fp == 0 { 1.0 } else { tp / (tp + fp) };
    let recall = tp / (tp + fn_);
    let accuracy = (tp + tn) / (tp + tn + fp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(Metrics { precision, recall, accuracy, f1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub delta: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub sg: ScenarioGesture,
    pub points: Vec<PrPoint>,
}

/// The `i`-th of `k` thresholds spaced evenly over `[0, 1]`.
pub fn threshold(i: usize, k: usize) -> f64 {
    i as f64 / (k - 1) as f64
}

/// Precision and recall at `k` evenly spaced thresholds from 0 to 1
/// inclusive. Equivalent to [`confusion_at`] at every threshold.
pub fn pr_sweep(records: &[TrialRecord], sg: ScenarioGesture, k: usize) -> Result<PrCurve, EvalError> {
    check_sg(sg)?;
    if k < 2 {
        return Err(EvalError::InvalidArgument(format!("threshold count {k} must be >= 2")));
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut n_pos = 0u64;
    let mut n_neg = 0u64;
    for r in records.iter().filter(|r| r.scenario == sg.scenario) {
        let hit = r.predicted == sg.gesture;
        if r.truth == sg.gesture {
            n_pos += 1;
            if hit {
                pos.push(r.confidence as f64);
            }
        } else {
            n_neg += 1;
            if hit {
                neg.push(r.confidence as f64);
            }
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let at_least = |v: &[f64], d: f64| (v.len() - v.partition_point(|&c| c < d)) as u64;
    let points = (0..k)
        .map(|i| {
            let delta = threshold(i, k);
            let tp = at_least(&pos, delta);
            let fp = at_least(&neg, delta);
            let cm = ConfusionMatrix { tp, fp, tn: n_neg - fp, fn_: n_pos - tp };
            metrics(&cm).map(|m| PrPoint { delta, precision: m.precision, recall: m.recall })
        })
        .collect::<Result<_, _>>()?;
    Ok(PrCurve { sg, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroAverages {
    pub macro_accuracy: f64,
    pub macro_f1: f64,
}

/// Number of scenario-gesture pairs in a full evaluation.
pub const FULL_ROW_COUNT: usize = 14;

/// Unweighted means of `(accuracy, f1)` rows over all 14 pairs.
pub fn macro_average(rows: &[(f64, f64)]) -> Result<MacroAverages, EvalError> {
    if rows.len() != FULL_ROW_COUNT {
        return Err(EvalError::WrongRowCount(rows.len()));
    }
    Ok(mean_rows(rows))
}

/// Unweighted means over any nonempty set of rows.
pub fn mean_rows(rows: &[(f64, f64)]) -> MacroAverages {
    let n = rows.len() as f64;
    MacroAverages {
        macro_accuracy: rows.iter().map(|r| r.0).sum::<f64>() / n,
        macro_f1: rows.iter().map(|r| r.1).sum::<f64>() / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    #[test]
    fn worked_example() {
        let m = metrics(&cm(1900, 100, 3900, 100)).unwrap();
        assert!((m.precision - 0.95).abs() < 1e-12);
        assert!((m.recall - 0.95).abs() < 1e-12);
        assert!((m.f1 - 0.95).abs() < 1e-12);
        assert!((m.accuracy - 5800.0 / 6000.0).abs() < 1e-12);
    }

    #[test]
    fn conventions() {
        let m = metrics(&cm(0, 0, 4000, 2000)).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 0.0, 0.0));
        let m = metrics(&cm(7, 0, 0, 7)).unwrap();
        assert_eq!((m.precision, m.recall), (1.0, 0.5));
        assert!(matches!(metrics(&cm(0, 3, 3, 0)), Err(EvalError::EmptyPositives)));
    }

    #[test]
    fn macro_needs_fourteen_rows() {
        assert!(matches!(macro_average(&[(0.5, 0.5); 13]), Err(EvalError::WrongRowCount(13))));
        let m = macro_average(&[(0.25, 0.75); 14]).unwrap();
        assert_eq!((m.macro_accuracy, m.macro_f1), (0.25, 0.75));
    }

    #[test]
    fn threshold_grid_includes_both_ends() {
        assert_eq!(threshold(0, 1000), 0.0);
        assert_eq!(threshold(999, 1000), 1.0);
    }
}
