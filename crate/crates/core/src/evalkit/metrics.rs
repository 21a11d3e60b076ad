use serde::{Deserialize, Serialize};

use crate::error::{KinError, Result};
use crate::label::{require_both_classes, Label};

/// Probabilities at or above this are called kin.
pub const DECISION_THRESHOLD: f64 = 0.5;

pub fn decide(probability: f64) -> Label {
    Label::from_decision(probability >= DECISION_THRESHOLD)
}

/// Fraction of decisions equal to the labels.
pub fn accuracy(decisions: &[Label], labels: &[Label]) -> Result<f64> {
    if decisions.len() != labels.len() || labels.is_empty() {
        return Err(KinError::DimensionMismatch(format!(
            "{} decisions for {} labels",
            decisions.len(),
            labels.len()
        )));
    }
    let hits = decisions.iter().zip(labels).filter(|(d, l)| d == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC over a threshold sweep (kin when `score >= t`) and its trapezoid
/// area. A run of tied scores moves diagonally, which counts each tied
/// positive-negative pair as one half.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<Roc> {
    if scores.len() != labels.len() {
        return Err(KinError::DimensionMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    require_both_classes(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(KinError::NonFinite("scores".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let n_pos = labels.iter().filter(|l| l.is_kin()).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;

    let mut points = vec![(0.0, 0.0)];
    // Integer counts kept in f64 are exact; twice the area times P*N.
    let (mut tp, mut fp, mut area2) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut gp, mut gn) = (0.0, 0.0);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]].is_kin() {
                gp += 1.0;
            } else {
                gn += 1.0;
            }
            i += 1;
        }
        area2 += gn * (2.0 * tp + gp);
        tp += gp;
        fp += gn;
        points.push((fp / n_neg, tp / n_pos));
    }
    Ok(Roc {
        points,
        auc: area2 / (2.0 * n_pos * n_neg),
    })
}
