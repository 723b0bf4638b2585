use super::{class_index, AbsaError, CLASSES};
use crate::corpus::Sentiment;
use serde::{Deserialize, Serialize};

/// Micro-averaged F1 over single-label predictions, which equals accuracy.
pub fn micro_f1(predictions: &[Sentiment], golds: &[Sentiment]) -> Result<f64, AbsaError> {
    if predictions.len() != golds.len() {
        return Err(AbsaError::LengthMismatch {
            left: predictions.len(),
            right: golds.len(),
        });
    }
    if golds.is_empty() {
        return Err(AbsaError::Empty);
    }
    let m = ConfusionMatrix::from_pairs(golds, predictions);
    let tp: usize = (0..3).map(|i| m.counts[i][i]).sum();
    let fp: usize = (0..3).map(|i| m.column_sum(i) - m.counts[i][i]).sum();
    let fn_: usize = (0..3).map(|i| m.row_sum(i) - m.counts[i][i]).sum();
    Ok(f1(tp, fp, fn_))
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Gold labels on rows, predictions on columns, both in class order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: Sentiment,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl ConfusionMatrix {
    /// Pairs whose labels are not one of the three classes are skipped.
    pub fn from_pairs(golds: &[Sentiment], predictions: &[Sentiment]) -> Self {
        let mut m = ConfusionMatrix::default();
        for (g, p) in golds.iter().zip(predictions) {
            if let (Some(gi), Some(pi)) = (class_index(*g), class_index(*p)) {
                m.counts[gi][pi] += 1;
            }
        }
        m
    }

    pub fn row_sum(&self, row: usize) -> usize {
        self.counts[row].iter().sum()
    }

    pub fn column_sum(&self, col: usize) -> usize {
        self.counts.iter().map(|r| r[col]).sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn per_class(&self) -> Vec<ClassScores> {
        CLASSES
            .iter()
            .enumerate()
            .map(|(i, &label)| {
                let tp = self.counts[i][i];
                let predicted = self.column_sum(i);
                let support = self.row_sum(i);
                let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
                ClassScores {
                    label,
                    precision: ratio(tp, predicted),
                    recall: ratio(tp, support),
                    f1: f1(tp, predicted - tp, support - tp),
                    support,
                }
            })
            .collect()
    }
}
