//! Confusion-matrix metrics, per-class precision/recall/F1, and ROC/AUC.

pub mod studies;

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, ALL_LABELS};

/// Default number of ROC thresholds over [0.5, 1).
pub const DEFAULT_ROC_THRESHOLDS: usize = 256;

/// One-vs-rest confusion counts and derived ratios for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSummary {
    /// Class order: down, stationary, up.
    pub per_class: [ClassMetrics; 3],
    pub n: usize,
}

/// Ratio with the zero-denominator convention: 0 when tp+fp (or tp+fn) is 0.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One-vs-rest confusion counts per class, with exact integer counting.
pub fn confusion(preds: &[Label], labels: &[Label]) -> ConfusionSummary {
    assert_eq!(preds.len(), labels.len(), "prediction/label length mismatch");
    assert!(!preds.is_empty(), "confusion requires at least one pair");
    let mut counts = [[0usize; 4]; 3]; // per class: tp, fp, fn, tn
    for (&p, &y) in preds.iter().zip(labels.iter()) {
        for label in ALL_LABELS {
            let k = label.index();
            match (p == label, y == label) {
                (true, true) => counts[k][0] += 1,
                (true, false) => counts[k][1] += 1,
                (false, true) => counts[k][2] += 1,
                (false, false) => counts[k][3] += 1,
            }
        }
    }
    let per_class = ALL_LABELS.map(|label| {
        let [tp, fp, fn_, tn] = counts[label.index()];
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ClassMetrics {
            label,
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    });
    ConfusionSummary { per_class, n: preds.len() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// ROC sweep over thresholds in [0.5, 1) for plotting, plus the empirical
/// AUC over all score cut-points (trapezoid rule, closed at (0,0) and
/// (1,1)), which makes the AUC invariant under strictly monotone score
/// transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

pub fn roc(scores: &[f64], labels: &[bool], n_thresholds: usize) -> RocCurve {
    assert_eq!(scores.len(), labels.len());
    assert!(n_thresholds > 0);
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    let mut points = Vec::with_capacity(n_thresholds);
    for i in 0..n_thresholds {
        let threshold = 0.5 + 0.5 * i as f64 / n_thresholds as f64;
        let mut tp = 0;
        let mut fp = 0;
        for (&s, &l) in scores.iter().zip(labels.iter()) {
            if s >= threshold {
                if l {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        points.push(RocPoint { threshold, tpr: ratio(tp, pos), fpr: ratio(fp, neg) });
    }
    RocCurve { points, auc: empirical_auc(scores, labels, pos, neg) }
}

/// Trapezoid area under the full empirical ROC: every distinct score is a
/// cut-point; tied scores contribute half credit (this is exactly the
/// Mann–Whitney statistic). Degenerate single-class inputs return 0.5.
fn empirical_auc(scores: &[f64], labels: &[bool], pos: usize, neg: usize) -> f64 {
    if pos == 0 || neg == 0 {
        return 0.5;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut auc = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_tpr = 0.0;
    let mut prev_fpr = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        // Consume the whole tie group at this score.
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / pos as f64;
        let fpr = fp as f64 / neg as f64;
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    // The sweep ends at (1,1); the polygon started at (0,0).
    auc
}
