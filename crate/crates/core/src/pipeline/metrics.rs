use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging<T> {
    /// F1 of the named positive class.
    Binary(T),
    /// Unweighted mean of per-class F1 over classes present in either vector.
    Macro,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("prediction length {pred} differs from truth length {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("cannot score empty label vectors")]
    Empty,
}

fn class_f1<T: PartialEq>(pred: &[T], truth: &[T], class: &T) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (p, t) in pred.iter().zip(truth) {
        match (p == class, t == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// F1 score. Binary: `2TP / (2TP + FP + FN)`; `0/0` is defined as 0.
pub fn f1_score<T: Ord + Clone>(pred: &[T], truth: &[T], averaging: &Averaging<T>) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch { pred: pred.len(), truth: truth.len() });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(match averaging {
        Averaging::Binary(pos) => class_f1(pred, truth, pos),
        Averaging::Macro => {
            let classes: BTreeSet<&T> = pred.iter().chain(truth).collect();
            classes.iter().map(|c| class_f1(pred, truth, *c)).sum::<f64>() / classes.len() as f64
        }
    })
}
