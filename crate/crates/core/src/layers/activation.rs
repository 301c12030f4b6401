use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub fn relu(x: &Matrix) -> Matrix {
    let mut y = x.clone();
    y.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// Passes `grad` where the pre-activation was strictly positive; the
/// subgradient at exactly zero is taken as zero.
pub fn relu_backward(pre: &Matrix, grad: &Matrix) -> Matrix {
    let mut g = grad.clone();
    relu_mask_in_place(pre.as_slice(), g.as_mut_slice());
    g
}

pub(crate) fn relu_mask_in_place(pre: &[f64], grad: &mut [f64]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Max-subtracted softmax probabilities.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross entropy of a softmax over `logits` against class `label`.
/// Returns `(-log p[label], p - one_hot(label))`.
pub fn softmax_ce(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    let k = logits.len();
    if k < 2 {
        return Err(Error::validation("logits", format!("need at least 2 classes, got {k}")));
    }
    if label >= k {
        return Err(Error::Label { label, classes: k });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    let loss = log_sum - (logits[label] - max);
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}
