//! Scalar losses with their gradients w.r.t. the prediction.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    pub loss: T,
    pub grad: Tensor<T>,
}

/// Mean squared error averaged over the `N` samples: `(1/N) Σ_i ‖pred_i − target_i‖²`.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<LossOutput<T>> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op: "mse_loss",
            expected: pred.shape().to_vec(),
            actual: target.shape().to_vec(),
        });
    }
    let n = T::from_usize(pred.shape()[0]).unwrap();
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        loss = loss + d * d;
        *g = (d + d) / n;
    }
    Ok(LossOutput { loss: loss / n, grad })
}

/// Batch mean of `−log softmax(logits)[label]`.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<LossOutput<T>> {
    let [n, k] = logits.dims2_flat();
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            op: "softmax_cross_entropy",
            expected: alloc::vec![n],
            actual: alloc::vec![labels.len()],
        });
    }
    let nt = T::from_usize(n).unwrap();
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(logits.shape());
    for ((row, g), &label) in logits.data().chunks_exact(k).zip(grad.data_mut().chunks_exact_mut(k)).zip(labels) {
        if label >= k {
            return Err(Error::LabelOutOfRange { label, classes: k });
        }
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for (gv, &v) in g.iter_mut().zip(row) {
            *gv = (v - max).exp();
            z = z + *gv;
        }
        loss = loss + z.ln() - (row[label] - max);
        for gv in g.iter_mut() {
            *gv = *gv / z / nt;
        }
        g[label] = g[label] - T::one() / nt;
    }
    Ok(LossOutput { loss: loss / nt, grad })
}
