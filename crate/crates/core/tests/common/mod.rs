#![allow(dead_code)]

use gocnn_core::Tensor;

pub mod frozen;

/// Direct nested-loop cross-correlation with zero padding.
pub fn brute_conv(x: &Tensor<f64>, k: &Tensor<f64>, bias: &[f64], stride: usize, pad: usize) -> Tensor<f64> {
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (od, m) = (k.shape()[0], k.shape()[2]);
    let oh = (h + 2 * pad - m) / stride + 1;
    let ow = (w + 2 * pad - m) / stride + 1;
    let mut out = Tensor::zeros(&[n, od, oh, ow]);
    for s in 0..n {
        for o in 0..od {
            for r in 0..oh {
                for q in 0..ow {
                    let mut acc = bias[o];
                    for ch in 0..c {
                        for i in 0..m {
                            for j in 0..m {
                                let y = (r * stride + i) as isize - pad as isize;
                                let xx = (q * stride + j) as isize - pad as isize;
                                if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                                    continue;
                                }
                                acc += x.at4(s, ch, y as usize, xx as usize) * k.at4(o, ch, i, j);
                            }
                        }
                    }
                    out.data_mut()[((s * od + o) * oh + r) * ow + q] = acc;
                }
            }
        }
    }
    out
}

/// Finite-difference step used throughout: `1e-5 · max(1, |θ|)`.
pub fn fd_step(theta: f64) -> f64 {
    1e-5 * theta.abs().max(1.0)
}

/// Central difference of `f` in coordinate `i` of `p`, Richardson-extrapolated
/// over steps `h` and `h/2` so truncation error is O(h⁴).
pub fn central_diff(p: &[f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = fd_step(p[i]);
    let mut q = p.to_vec();
    let mut d = |step: f64| {
        q[i] = p[i] + step;
        let up = f(&q);
        q[i] = p[i] - step;
        let down = f(&q);
        (up - down) / (2.0 * step)
    };
    let coarse = d(h);
    let fine = d(h / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// Relative error with an absolute floor so exact zeros compare sanely.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Deterministic pseudo-random values in `[-1, 1)`.
pub fn wave(n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|i| ((i as f64 + phase) * 0.7919).sin() * 0.999).collect()
}
