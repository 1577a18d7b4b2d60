use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Numerically stable softmax in f64.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|v| v / sum).collect()
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub class: usize,
    pub support: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

impl ClassCounts {
    pub fn recall(&self) -> f64 {
        ratio(self.true_positive, self.true_positive + self.false_negative)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.true_positive, self.true_positive + self.false_positive)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Accuracy plus macro recall and F1 over every class that occurs in either
/// the labels or the predictions (undefined ratios count as 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub n: usize,
    pub accuracy: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub cross_entropy: f64,
    pub per_class: Vec<ClassCounts>,
}

pub fn compute_metrics(truth: &[usize], probs: &[Vec<f64>]) -> Result<ClassificationMetrics> {
    if truth.is_empty() {
        return Err(Error::Dataset("cannot evaluate an empty sample set".into()));
    }
    if truth.len() != probs.len() {
        return Err(Error::ShapeMismatch {
            left: format!("{} labels", truth.len()),
            right: format!("{} predictions", probs.len()),
        });
    }
    let k = probs[0].len();
    if let Some(&bad) = truth.iter().find(|&&t| t >= k) {
        return Err(Error::Dataset(format!("label {bad} outside 0..{k}")));
    }
    let pred: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let mut counts: Vec<ClassCounts> = (0..k)
        .map(|class| ClassCounts { class, support: 0, true_positive: 0, false_positive: 0, false_negative: 0 })
        .collect();
    let mut ce = 0.0;
    for ((&t, &p), probs) in truth.iter().zip(&pred).zip(probs) {
        counts[t].support += 1;
        if t == p {
            counts[t].true_positive += 1;
        } else {
            counts[t].false_negative += 1;
            counts[p].false_positive += 1;
        }
        ce -= probs[t].max(f64::MIN_POSITIVE).ln();
    }
    let present: Vec<ClassCounts> = counts.into_iter().filter(|c| c.support > 0 || c.false_positive > 0).collect();
    let m = present.len() as f64;
    let correct: usize = present.iter().map(|c| c.true_positive).sum();
    Ok(ClassificationMetrics {
        n: truth.len(),
        accuracy: correct as f64 / truth.len() as f64,
        macro_recall: present.iter().map(ClassCounts::recall).sum::<f64>() / m,
        macro_f1: present.iter().map(ClassCounts::f1).sum::<f64>() / m,
        cross_entropy: ce / truth.len() as f64,
        per_class: present,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn onehot(k: usize, i: usize) -> Vec<f64> {
        (0..k).map(|j| if j == i { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 5.0)).abs() < 1e-12);
        assert!((p[0] - 0.3522).abs() < 1e-4);
        let q = softmax(&[1.0 + 40.0, 40.0, 40.0, 40.0, 40.0, 40.0]);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(softmax(&[0.0; 6]).iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn perfect_predictions() {
        let truth = [0, 1, 2, 1];
        let probs: Vec<Vec<f64>> = truth.iter().map(|&t| onehot(3, t)).collect();
        let m = compute_metrics(&truth, &probs).unwrap();
        assert_eq!((m.accuracy, m.macro_recall, m.macro_f1), (1.0, 1.0, 1.0));
        assert_eq!(m.cross_entropy, 0.0);
    }

    #[test]
    fn constant_prediction_on_balanced_classes() {
        let truth: Vec<usize> = (0..6).flat_map(|c| [c; 5]).collect();
        let probs = vec![onehot(6, 0); truth.len()];
        let m = compute_metrics(&truth, &probs).unwrap();
        assert!((m.accuracy - 1.0 / 6.0).abs() < 1e-12);
        assert!((m.macro_recall - 1.0 / 6.0).abs() < 1e-12);
        // class 0: precision 1/6, recall 1 -> F1 = 2/7
        assert!((m.macro_f1 - (2.0 / 7.0) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_probabilities_give_ln_k() {
        let truth = [0, 3, 5, 2];
        let probs = vec![vec![1.0 / 6.0; 6]; 4];
        let m = compute_metrics(&truth, &probs).unwrap();
        assert!((m.cross_entropy - 6f64.ln()).abs() < 1e-12);
        assert!((m.cross_entropy - 1.7918).abs() < 1e-4);
    }

    #[test]
    fn rejects_empty_and_out_of_range() {
        assert!(compute_metrics(&[], &[]).is_err());
        assert!(compute_metrics(&[4], &[vec![0.5, 0.5]]).is_err());
    }
}
