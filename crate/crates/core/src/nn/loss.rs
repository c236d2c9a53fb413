use super::NnError;
use crate::tensor::{Scalar, Tensor};

/// Mean squared error over all elements and its gradient `2 (pred - target) / n`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>), NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::Mismatch(format!(
            "mse prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p.f64() - t.f64();
        sum += d * d;
        grad.push(T::of(2.0 * d / n));
    }
    let loss = sum / n;
    if !loss.is_finite() {
        return Err(NnError::NonFinite("mse loss".into()));
    }
    Ok((T::of(loss), Tensor::new(pred.shape().to_vec(), grad)?))
}

/// Mean softmax cross-entropy of `[batch, classes]` logits against class ids.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>), NnError> {
    if logits.shape().len() != 2 || logits.batch() != labels.len() {
        return Err(NnError::Mismatch(format!(
            "logits {:?} for {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    let (batch, classes) = (logits.batch(), logits.shape()[1]);
    let mut grad = Vec::with_capacity(logits.len());
    let mut total = 0.0;
    for (b, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(NnError::Mismatch(format!("label {label} outside {classes} classes")));
        }
        let row = logits.sample(b);
        let max = row.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v.f64() - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        total += z.ln() + max - row[label].f64();
        for (c, e) in exps.iter().enumerate() {
            let target = if c == label { 1.0 } else { 0.0 };
            grad.push(T::of((e / z - target) / batch as f64));
        }
    }
    let loss = total / batch as f64;
    if !loss.is_finite() {
        return Err(NnError::NonFinite("cross-entropy loss".into()));
    }
    Ok((T::of(loss), Tensor::new(logits.shape().to_vec(), grad)?))
}
