//! Confusion counts, precision/recall/F1 and precision-recall-curve AUC.
//!
//! Problematic is the positive class. Any 0/0 ratio is defined as 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::{CellId, Label};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(
    preds: &BTreeMap<CellId, Label>,
    truth: &BTreeMap<CellId, Label>,
) -> Result<ConfusionCounts> {
    if preds.len() != truth.len() || preds.keys().ne(truth.keys()) {
        return Err(Error::KeyMismatch);
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in preds.values().zip(truth.values()) {
        match (p, t) {
            (Label::Problematic, Label::Problematic) => c.tp += 1,
            (Label::Problematic, Label::Normal) => c.fp += 1,
            (Label::Normal, Label::Normal) => c.tn += 1,
            (Label::Normal, Label::Problematic) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn precision_recall_f1(c: &ConfusionCounts) -> Scores {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    Scores {
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

/// One step of the precision-recall curve: predicting problematic for every
/// cell scored at or above `threshold` (in ranking order).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrcPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

fn ranked(
    scores: &BTreeMap<CellId, f64>,
    truth: &BTreeMap<CellId, Label>,
) -> Result<Vec<(f64, bool)>> {
    if scores.len() != truth.len() || scores.keys().ne(truth.keys()) {
        return Err(Error::KeyMismatch);
    }
    let mut rows: Vec<(CellId, f64, bool)> = scores
        .iter()
        .map(|(id, &s)| (*id, s, truth[id].is_problematic()))
        .collect();
    if !rows.iter().any(|r| r.2) {
        return Err(Error::NoPositives);
    }
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(rows.into_iter().map(|(_, s, p)| (s, p)).collect())
}

/// Precision and recall after each prefix of the descending-score ranking.
pub fn prc_points(
    scores: &BTreeMap<CellId, f64>,
    truth: &BTreeMap<CellId, Label>,
) -> Result<Vec<PrcPoint>> {
    let rows = ranked(scores, truth)?;
    let positives = rows.iter().filter(|r| r.1).count();
    let mut tp = 0;
    Ok(rows
        .iter()
        .enumerate()
        .map(|(i, &(score, pos))| {
            tp += usize::from(pos);
            PrcPoint {
                threshold: score,
                precision: tp as f64 / (i + 1) as f64,
                recall: tp as f64 / positives as f64,
            }
        })
        .collect())
}

/// Step-wise average precision: `sum (R_i - R_{i-1}) * P_i` over ranking prefixes.
pub fn prc_auc(scores: &BTreeMap<CellId, f64>, truth: &BTreeMap<CellId, Label>) -> Result<f64> {
    let mut prev_recall = 0.0;
    let mut auc = 0.0;
    for p in prc_points(scores, truth)? {
        auc += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    Ok(auc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Normal as N, Problematic as P};

    fn map<T: Copy>(v: &[T]) -> BTreeMap<CellId, T> {
        v.iter()
            .enumerate()
            .map(|(i, x)| (i as CellId, *x))
            .collect()
    }

    #[test]
    fn confusion_cases() {
        let truth = map(&[P, P, P, P, P, N, N, N, N, N]);
        let c = confusion(&truth, &truth).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (5, 5, 0, 0));
        let truth = map(&[P, P, P, N]);
        let c = confusion(&map(&[N; 4]), &truth).unwrap();
        assert_eq!(c.fn_, 3);
        assert_eq!(c.total(), 4);
        assert!(confusion(&map(&[N; 3]), &truth).is_err());
    }

    #[test]
    fn reported_rows_reproduce_f1() {
        assert!((f1_score(0.56, 0.83) - 0.67).abs() < 0.005);
        assert!((f1_score(0.50, 0.17) - 0.25).abs() < 0.005);
        let s = precision_recall_f1(&ConfusionCounts {
            tp: 0,
            fp: 3,
            tn: 2,
            fn_: 1,
        });
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = precision_recall_f1(&ConfusionCounts::default());
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn auc_hand_cases() {
        let auc = prc_auc(&map(&[0.9, 0.8, 0.7]), &map(&[P, N, P])).unwrap();
        assert!((auc - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        let perfect = prc_auc(&map(&[0.9, 0.8, 0.2, 0.1]), &map(&[P, P, N, N])).unwrap();
        assert_eq!(perfect, 1.0);
        let last = prc_auc(&map(&[0.9, 0.8, 0.7, 0.6, 0.1]), &map(&[N, N, N, N, P])).unwrap();
        assert!((last - 0.2).abs() < 1e-12);
        assert!(matches!(
            prc_auc(&map(&[0.1, 0.2]), &map(&[N, N])),
            Err(Error::NoPositives)
        ));
    }

    #[test]
    fn tied_scores_rank_by_cell_id() {
        let pts = prc_points(&map(&[0.5, 0.5]), &map(&[N, P])).unwrap();
        assert_eq!(pts[0].precision, 0.0);
        assert_eq!(pts[1].recall, 1.0);
    }
}
