//! 2-D cross-correlation (no kernel flip) via im2col + GEMM.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::{gemm, Real};
use crate::tensor::Tensor;

/// Output extent along one axis, or `None` when the window does not fit.
pub fn conv_output_extent(input: usize, kernel: usize, padding: usize, stride: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || kernel == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    od: usize,
    m: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    padding: usize,
}

impl Geometry {
    fn new(input: &Tensor<impl Real>, kernels: &Tensor<impl Real>, stride: usize, padding: usize) -> Result<Self> {
        let [n, c, h, w] = input.dims4("conv2d")?;
        let [od, kc, kh, kw] = kernels.dims4("conv2d")?;
        if kc != c || kh != kw {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                expected: vec![od, c, kh, kh],
                actual: vec![od, kc, kh, kw],
            });
        }
        let empty = || Error::EmptyOutput {
            op: "conv2d",
            input: [h, w],
            kernel: kh,
            padding,
            stride,
        };
        let oh = conv_output_extent(h, kh, padding, stride).ok_or_else(empty)?;
        let ow = conv_output_extent(w, kw, padding, stride).ok_or_else(empty)?;
        Ok(Self {
            n,
            c,
            h,
            w,
            od,
            m: kh,
            oh,
            ow,
            stride,
            padding,
        })
    }

    fn patch_len(&self) -> usize {
        self.c * self.m * self.m
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// Unroll one sample `[C,H,W]` into `col[(c,ki,kj), (oi,oj)]`.
    fn im2col<T: Real>(&self, sample: &[T], col: &mut [T]) {
        let p = self.positions();
        let pad = self.padding as isize;
        for c in 0..self.c {
            let plane = &sample[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.m {
                for kj in 0..self.m {
                    let row = (c * self.m + ki) * self.m + kj;
                    let dst = &mut col[row * p..(row + 1) * p];
                    for oi in 0..self.oh {
                        let y = (oi * self.stride + ki) as isize - pad;
                        let line = &mut dst[oi * self.ow..(oi + 1) * self.ow];
                        if y < 0 || y >= self.h as isize {
                            line.fill(T::zero());
                            continue;
                        }
                        let src = &plane[y as usize * self.w..(y as usize + 1) * self.w];
                        for (oj, v) in line.iter_mut().enumerate() {
                            let x = (oj * self.stride + kj) as isize - pad;
                            *v = if x < 0 || x >= self.w as isize {
                                T::zero()
                            } else {
                                src[x as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Self::im2col`]: accumulate `col` back into `[C,H,W]`.
    fn col2im<T: Real>(&self, col: &[T], sample: &mut [T]) {
        let p = self.positions();
        let pad = self.padding as isize;
        for c in 0..self.c {
            let plane = &mut sample[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.m {
                for kj in 0..self.m {
                    let row = (c * self.m + ki) * self.m + kj;
                    let src = &col[row * p..(row + 1) * p];
                    for oi in 0..self.oh {
                        let y = (oi * self.stride + ki) as isize - pad;
                        if y < 0 || y >= self.h as isize {
                            continue;
                        }
                        let dst = &mut plane[y as usize * self.w..(y as usize + 1) * self.w];
                        for oj in 0..self.ow {
                            let x = (oj * self.stride + kj) as isize - pad;
                            if x >= 0 && x < self.w as isize {
                                dst[x as usize] = dst[x as usize] + src[oi * self.ow + oj];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `out[n,o] = Σ_c pad(input)[n,c] ⋆ kernels[o,c] + bias[o]`.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &[T],
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = Geometry::new(input, kernels, stride, padding)?;
    if bias.len() != g.od {
        return Err(Error::ShapeMismatch {
            op: "conv2d bias",
            expected: vec![g.od],
            actual: vec![bias.len()],
        });
    }
    let (k, p) = (g.patch_len(), g.positions());
    let mut out = Tensor::zeros(&[g.n, g.od, g.oh, g.ow]);
    let mut col = vec![T::zero(); k * p];
    let in_stride = g.c * g.h * g.w;
    let out_stride = g.od * p;
    for s in 0..g.n {
        g.im2col(&input.data()[s * in_stride..(s + 1) * in_stride], &mut col);
        let dst = &mut out.data_mut()[s * out_stride..(s + 1) * out_stride];
        for (o, plane) in dst.chunks_exact_mut(p).enumerate() {
            plane.fill(bias[o]);
        }
        gemm(g.od, k, p, T::one(), kernels.data(), false, &col, false, T::one(), dst);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub kernels: Tensor<T>,
    pub bias: Vec<T>,
}

/// Exact adjoints of [`conv2d_forward`] with respect to input, kernels and bias.
///
/// `want_input = false` skips the input gradient (first layer of a network).
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    padding: usize,
    want_input: bool,
) -> Result<ConvGrads<T>> {
    let g = Geometry::new(input, kernels, stride, padding)?;
    let expected = [g.n, g.od, g.oh, g.ow];
    if grad_out.shape() != expected {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            expected: expected.to_vec(),
            actual: grad_out.shape().to_vec(),
        });
    }
    let (k, p) = (g.patch_len(), g.positions());
    let mut grad_kernels = Tensor::zeros(kernels.shape());
    let mut grad_bias = vec![T::zero(); g.od];
    let mut grad_input = want_input.then(|| Tensor::zeros(input.shape()));
    let mut col = vec![T::zero(); k * p];
    let mut grad_col = vec![T::zero(); if want_input { k * p } else { 0 }];
    let in_stride = g.c * g.h * g.w;
    let out_stride = g.od * p;
    for s in 0..g.n {
        let go = &grad_out.data()[s * out_stride..(s + 1) * out_stride];
        for (o, plane) in go.chunks_exact(p).enumerate() {
            let mut acc = T::zero();
            for &v in plane {
                acc = acc + v;
            }
            grad_bias[o] = grad_bias[o] + acc;
        }
        g.im2col(&input.data()[s * in_stride..(s + 1) * in_stride], &mut col);
        // dK[od,k] += dY[od,p] · col[k,p]^T
        gemm(g.od, p, k, T::one(), go, false, &col, true, T::one(), grad_kernels.data_mut());
        if let Some(gi) = grad_input.as_mut() {
            // dcol[k,p] = K[od,k]^T · dY[od,p]
            gemm(k, g.od, p, T::one(), kernels.data(), true, go, false, T::zero(), &mut grad_col);
            g.col2im(&grad_col, &mut gi.data_mut()[s * in_stride..(s + 1) * in_stride]);
        }
    }
    Ok(ConvGrads {
        input: grad_input,
        kernels: grad_kernels,
        bias: grad_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_kernel_sums_window() {
        let x = Tensor::full(&[1, 1, 3, 3], 1.0f64);
        let k = Tensor::full(&[1, 1, 3, 3], 1.0f64);
        let y = conv2d_forward(&x, &k, &[0.0], 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data()[0], 9.0);
    }

    #[test]
    fn centered_delta_is_identity() {
        let x = Tensor::from_fn(&[2, 1, 4, 5], |i| (i as f64 * 0.37).sin());
        let mut k = Tensor::zeros(&[1, 1, 3, 3]);
        k.data_mut()[4] = 1.0;
        let y = conv2d_forward(&x, &k, &[0.0], 1, 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn no_flip_convention() {
        // Kernel with a single 1 at top-left picks the up-left neighbour.
        let x = Tensor::from_fn(&[1, 1, 3, 3], |i| i as f64);
        let mut k = Tensor::zeros(&[1, 1, 3, 3]);
        k.data_mut()[0] = 1.0;
        let y = conv2d_forward(&x, &k, &[0.0], 1, 1).unwrap();
        assert_eq!(y.data()[4], 0.0);
        assert_eq!(y.data()[8], 4.0);
    }

    #[test]
    fn strided_extent() {
        assert_eq!(conv_output_extent(7, 3, 1, 2), Some(4));
        assert_eq!(conv_output_extent(2, 5, 1, 1), None);
        let x = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        let k = Tensor::<f64>::zeros(&[1, 1, 5, 5]);
        assert!(matches!(conv2d_forward(&x, &k, &[0.0], 1, 1), Err(Error::EmptyOutput { .. })));
    }

    #[test]
    fn channel_mismatch_is_reported() {
        let x = Tensor::<f64>::zeros(&[1, 2, 4, 4]);
        let k = Tensor::<f64>::zeros(&[3, 1, 3, 3]);
        assert!(matches!(conv2d_forward(&x, &k, &[0.0; 3], 1, 0), Err(Error::ShapeMismatch { .. })));
        let k = Tensor::<f64>::zeros(&[3, 2, 3, 3]);
        assert!(conv2d_forward(&x, &k, &[0.0; 2], 1, 0).is_err());
    }

    #[test]
    fn zero_cotangent_gives_zero_grads() {
        let x = Tensor::from_fn(&[2, 2, 5, 5], |i| (i as f64).cos());
        let k = Tensor::from_fn(&[3, 2, 3, 3], |i| (i as f64).sin());
        let go = Tensor::zeros(&[2, 3, 5, 5]);
        let g = conv2d_backward(&x, &k, &go, 1, 1, true).unwrap();
        assert!(g.input.unwrap().data().iter().all(|&v| v == 0.0));
        assert!(g.kernels.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_wrong_cotangent_shape() {
        let x = Tensor::<f64>::zeros(&[1, 1, 5, 5]);
        let k = Tensor::<f64>::zeros(&[2, 1, 3, 3]);
        let go = Tensor::zeros(&[1, 2, 5, 5]);
        assert!(conv2d_backward(&x, &k, &go, 1, 0, true).is_err());
    }
}
