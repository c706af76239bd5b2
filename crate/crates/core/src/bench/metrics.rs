//! Binary classification metrics with illicit as the positive class.

use serde::{Deserialize, Serialize};

use crate::label::Class;

use super::BenchError;

pub const FLAG_PRECISION_UNDEFINED: &str = "precision_zero_division";
pub const FLAG_RECALL_UNDEFINED: &str = "recall_zero_division";
pub const FLAG_NO_LABELS: &str = "no_labelled_nodes";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True instances of the class.
    pub support: usize,
    /// Zero-division conventions that were applied.
    pub flags: Vec<String>,
}

impl ClassMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let mut flags = Vec::new();
        let precision = if tp + fp == 0 {
            flags.push(FLAG_PRECISION_UNDEFINED.to_string());
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            flags.push(FLAG_RECALL_UNDEFINED.to_string());
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        Self { precision, recall, f1: f1_score(precision, recall), support: tp + fn_, flags }
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub illicit: ClassMetrics,
    pub licit: ClassMetrics,
    pub micro_f1: f64,
    pub accuracy: f64,
    pub total: usize,
}

/// Counts over paired predictions and ground truth. Micro-averaged F1 is
/// computed from pooled counts and checked against accuracy.
pub fn compute_metrics(predicted: &[Class], truth: &[Class]) -> Result<MetricsReport, BenchError> {
    if predicted.len() != truth.len() {
        return Err(BenchError::Config(format!("{} predictions for {} labels", predicted.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(BenchError::EmptyIndexSet);
    }
    // confusion[truth][predicted]
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[t.index()][p.index()] += 1;
    }
    let (i, l) = (Class::Illicit.index(), Class::Licit.index());
    let illicit = ClassMetrics::from_counts(confusion[i][i], confusion[l][i], confusion[i][l]);
    let licit = ClassMetrics::from_counts(confusion[l][l], confusion[i][l], confusion[l][i]);
    let correct = confusion[i][i] + confusion[l][l];
    let total = truth.len();
    // pooled over both classes: every error is one FP and one FN
    let pooled_tp = correct;
    let pooled_fp = total - correct;
    let micro_p = pooled_tp as f64 / (pooled_tp + pooled_fp) as f64;
    let micro_f1 = f1_score(micro_p, micro_p);
    let accuracy = correct as f64 / total as f64;
    assert!((micro_f1 - accuracy).abs() < 1e-12, "micro F1 {micro_f1} differs from accuracy {accuracy}");
    Ok(MetricsReport { illicit, licit, micro_f1, accuracy, total })
}

/// Illicit F1 of one time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepF1 {
    pub time_step: u32,
    /// `None` when the step has no labelled nodes.
    pub f1: Option<f64>,
    pub support_illicit: usize,
    pub labelled: usize,
    pub flags: Vec<String>,
}

/// One entry per step in `steps`, each over that step's labelled samples.
pub fn per_timestep_f1(
    predicted: &[Class],
    truth: &[Class],
    sample_steps: &[u32],
    steps: std::ops::RangeInclusive<u32>,
) -> Result<Vec<StepF1>, BenchError> {
    if predicted.len() != truth.len() || truth.len() != sample_steps.len() {
        return Err(BenchError::Config("prediction, label and step lists differ in length".into()));
    }
    if steps.is_empty() {
        return Err(BenchError::Config("no test steps".into()));
    }
    let mut out = Vec::new();
    for t in steps {
        let idx: Vec<usize> = (0..truth.len()).filter(|&k| sample_steps[k] == t).collect();
        if idx.is_empty() {
            out.push(StepF1 {
                time_step: t,
                f1: None,
                support_illicit: 0,
                labelled: 0,
                flags: vec![FLAG_NO_LABELS.to_string()],
            });
            continue;
        }
        let p: Vec<Class> = idx.iter().map(|&k| predicted[k]).collect();
        let y: Vec<Class> = idx.iter().map(|&k| truth[k]).collect();
        let m = compute_metrics(&p, &y)?;
        out.push(StepF1 {
            time_step: t,
            f1: Some(m.illicit.f1),
            support_illicit: m.illicit.support,
            labelled: idx.len(),
            flags: m.illicit.flags,
        });
    }
    Ok(out)
}

/// Mean F1 over the steps of `range` that have a value.
pub fn mean_f1(series: &[StepF1], range: std::ops::RangeInclusive<u32>) -> Option<f64> {
    let vals: Vec<f64> = series.iter().filter(|s| range.contains(&s.time_step)).filter_map(|s| s.f1).collect();
    if vals.is_empty() { None } else { Some(vals.iter().sum::<f64>() / vals.len() as f64) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Class::{Illicit as I, Licit as L};

    #[test]
    fn closed_form_counts() {
        // TP=2, FP=1, FN=2, TN=1
        let pred = [I, I, I, L, L, L];
        let truth = [I, I, L, I, I, L];
        let m = compute_metrics(&pred, &truth).unwrap();
        assert!((m.illicit.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.illicit.recall, 0.5);
        assert!((m.illicit.f1 - 4.0 / 7.0).abs() < 1e-12);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.illicit.support, 4);
    }

    #[test]
    fn published_f1_values() {
        assert!((f1_score(0.956, 0.670) - 0.788).abs() < 5e-4);
        assert!((f1_score(0.850, 0.624) - 0.720).abs() < 5e-4);
    }

    #[test]
    fn all_licit_predictor_flags_precision() {
        let m = compute_metrics(&[L, L, L], &[I, L, L]).unwrap();
        assert_eq!(m.illicit.f1, 0.0);
        assert_eq!(m.illicit.flags, vec![FLAG_PRECISION_UNDEFINED.to_string()]);
        assert!(matches!(compute_metrics(&[], &[]), Err(BenchError::EmptyIndexSet)));
    }

    #[test]
    fn step_series_marks_absent_steps() {
        let truth = [I, L, I, L];
        let s = per_timestep_f1(&truth, &truth, &[3, 3, 5, 5], 3..=5).unwrap();
        assert_eq!(s[0].f1, Some(1.0));
        assert_eq!(s[1].f1, None);
        assert_eq!(s[1].flags, vec![FLAG_NO_LABELS.to_string()]);
        assert_eq!(s[2].f1, Some(1.0));
        assert_eq!(mean_f1(&s, 3..=5), Some(1.0));
        assert_eq!(mean_f1(&s, 4..=4), None);
    }
}
