//! 2×2 max pooling with stride 2. Ties go to the first maximum in row-major
//! window order; odd trailing rows/cols are dropped.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct PoolOutput<T> {
    pub output: Tensor<T>,
    /// Flat input index of the winner for every output element.
    pub argmax: Vec<usize>,
}

pub fn maxpool2d_forward<T: Real>(input: &Tensor<T>) -> Result<PoolOutput<T>> {
    let [n, c, h, w] = input.dims4("maxpool2d")?;
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::EmptyOutput {
            op: "maxpool2d",
            input: [h, w],
            kernel: 2,
            padding: 0,
            stride: 2,
        });
    }
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let src = input.data();
    let dst = out.data_mut();
    let mut k = 0;
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = base + 2 * i * w + 2 * j;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * i + di) * w + 2 * j + dj;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                dst[k] = src[best];
                argmax.push(best);
                k += 1;
            }
        }
    }
    Ok(PoolOutput { output: out, argmax })
}

pub fn maxpool2d_backward<T: Real>(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(Error::ShapeMismatch {
            op: "maxpool2d_backward",
            expected: alloc::vec![argmax.len()],
            actual: alloc::vec![grad_out.len()],
        });
    }
    let mut g = Tensor::zeros(input_shape);
    let gd = g.data_mut();
    for (&idx, &v) in argmax.iter().zip(grad_out.data()) {
        gd[idx] = gd[idx] + v;
    }
    Ok(g)
}
