//! Fully-connected affine map `y = x·Wᵀ + b`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::{gemm, Real};
use crate::tensor::Tensor;

/// `input` may have any rank; everything after the leading axis is flattened.
pub fn fc_forward<T: Real>(input: &Tensor<T>, weight: &Tensor<T>, bias: &[T]) -> Result<Tensor<T>> {
    let [n, d] = input.dims2_flat();
    let (k, wd) = match *weight.shape() {
        [k, wd] => (k, wd),
        _ => {
            return Err(Error::InvalidShape {
                op: "fc_forward",
                reason: alloc::format!("weight must be rank 2, got {:?}", weight.shape()),
            })
        }
    };
    if wd != d || bias.len() != k {
        return Err(Error::ShapeMismatch {
            op: "fc_forward",
            expected: vec![k, d],
            actual: vec![bias.len(), wd],
        });
    }
    let mut out = Tensor::zeros(&[n, k]);
    for row in out.data_mut().chunks_exact_mut(k) {
        row.copy_from_slice(bias);
    }
    gemm(n, d, k, T::one(), input.data(), false, weight.data(), true, T::one(), out.data_mut());
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FcGrads<T> {
    /// Same shape as the forward input.
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Vec<T>,
}

pub fn fc_backward<T: Real>(input: &Tensor<T>, weight: &Tensor<T>, grad_out: &Tensor<T>) -> Result<FcGrads<T>> {
    let [n, d] = input.dims2_flat();
    let k = weight.shape()[0];
    if grad_out.shape() != [n, k] || weight.len() != k * d {
        return Err(Error::ShapeMismatch {
            op: "fc_backward",
            expected: vec![n, k],
            actual: grad_out.shape().to_vec(),
        });
    }
    let mut gi = Tensor::zeros(input.shape());
    gemm(n, k, d, T::one(), grad_out.data(), false, weight.data(), false, T::zero(), gi.data_mut());
    let mut gw = Tensor::zeros(weight.shape());
    gemm(k, n, d, T::one(), grad_out.data(), true, input.data(), false, T::zero(), gw.data_mut());
    let mut gb = vec![T::zero(); k];
    for row in grad_out.data().chunks_exact(k) {
        for (b, &g) in gb.iter_mut().zip(row) {
            *b = *b + g;
        }
    }
    Ok(FcGrads {
        input: gi,
        weight: gw,
        bias: gb,
    })
}
