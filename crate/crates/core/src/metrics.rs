//! Accuracy measures: RMSE, ROC AUC and F1.

use crate::scalar::Scalar;

pub fn rmse<T: Scalar>(pred: &[T], truth: &[T]) -> f64 {
    assert_eq!(
        pred.len(),
        truth.len(),
        "prediction and truth lengths differ"
    );
    if pred.is_empty() {
        return f64::NAN;
    }
    let sse: f64 = pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| (p.to_f64_lossy() - t.to_f64_lossy()).powi(2))
        .sum();
    (sse / pred.len() as f64).sqrt()
}

/// Area under the ROC curve by the trapezoid rule over all score
/// thresholds; tied scores form one diagonal segment. `None` when either
/// class is absent.
pub fn auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "score and label lengths differ");
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    Some(area / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_labels(pred: &[bool], truth: &[bool]) -> Self {
        assert_eq!(
            pred.len(),
            truth.len(),
            "prediction and truth lengths differ"
        );
        let mut c = Confusion::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// `2tp / (2tp + fp + fn)`, taken as 0 when there are no true positives.
    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64
        }
    }
}

pub fn f1(pred: &[bool], truth: &[bool]) -> f64 {
    Confusion::from_labels(pred, truth).f1()
}

/// Labels by thresholding probabilities at 0.5.
pub fn threshold_labels<T: Scalar>(probs: &[T]) -> Vec<bool> {
    probs.iter().map(|&p| p >= T::lit(0.5)).collect()
}
