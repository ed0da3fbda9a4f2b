//! Pure batch transforms: crop/flip augmentation, rotation, Gaussian noise.
//!
//! All operate on `[N, C, H, W]` tensors and never touch labels. Randomised
//! variants take the generator explicitly so callers control the stream.

use alloc::vec::Vec;

#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// One crop-and-flip draw: top-left offset into the padded image and mirror flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropDraw {
    pub dy: usize,
    pub dx: usize,
    pub flip: bool,
}

impl CropDraw {
    /// The draw that reproduces the input for padding `pad`.
    pub fn identity(pad: usize) -> Self {
        Self {
            dy: pad,
            dx: pad,
            flip: false,
        }
    }

    pub fn sample<R: Rng + ?Sized>(pad: usize, rng: &mut R) -> Self {
        Self {
            dy: rng.random_range(0..=2 * pad),
            dx: rng.random_range(0..=2 * pad),
            flip: rng.random_bool(0.5),
        }
    }
}

/// Zero-pad by `pad`, crop back at the given offsets, optionally mirror left-right.
pub fn pad_crop_flip<T: Real>(x: &Tensor<T>, pad: usize, draws: &[CropDraw]) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4("pad_crop_flip")?;
    if draws.len() != n {
        return Err(Error::ShapeMismatch {
            op: "pad_crop_flip",
            expected: alloc::vec![n],
            actual: alloc::vec![draws.len()],
        });
    }
    let mut out = Tensor::zeros(x.shape());
    let src = x.data();
    let dst = out.data_mut();
    for (b, d) in draws.iter().enumerate() {
        if d.dy > 2 * pad || d.dx > 2 * pad {
            return Err(Error::InvalidConfig(alloc::format!("crop offset {d:?} exceeds padding {pad}")));
        }
        for ch in 0..c {
            let base = (b * c + ch) * h * w;
            for r in 0..h {
                let sr = (r + d.dy) as isize - pad as isize;
                if sr < 0 || sr >= h as isize {
                    continue;
                }
                for col in 0..w {
                    let oc = if d.flip { w - 1 - col } else { col };
                    let sc = (oc + d.dx) as isize - pad as isize;
                    if sc < 0 || sc >= w as isize {
                        continue;
                    }
                    dst[base + r * w + col] = src[base + sr as usize * w + sc as usize];
                }
            }
        }
    }
    Ok(out)
}

/// Random pad-crop plus 50% horizontal flip, one draw per image.
pub fn augment_pad_crop_flip<T: Real, R: Rng + ?Sized>(x: &Tensor<T>, pad: usize, rng: &mut R) -> Result<Tensor<T>> {
    let n = x.dims4("augment_pad_crop_flip")?[0];
    let draws: Vec<CropDraw> = (0..n).map(|_| CropDraw::sample(pad, rng)).collect();
    pad_crop_flip(x, pad, &draws)
}

/// Exact quarter turn count when `degrees` is a multiple of 90.
fn quarter_turns(degrees: f64) -> Option<u32> {
    let q = degrees / 90.0;
    if q == q.round() && q.abs() < 1e15 {
        Some((q as i64).rem_euclid(4) as u32)
    } else {
        None
    }
}

/// Rotate every image counter-clockwise by `degrees` about its centre,
/// bilinear interpolation, zero outside. Multiples of 90° on square images
/// (and 180° on any image) are exact permutations.
pub fn rotate<T: Real>(x: &Tensor<T>, degrees: f64) -> Result<Tensor<T>> {
    let n = x.dims4("rotate")?[0];
    rotate_each(x, &alloc::vec![degrees; n])
}

/// Rotate image `b` by `degrees[b]`.
pub fn rotate_each<T: Real>(x: &Tensor<T>, degrees: &[f64]) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4("rotate")?;
    if degrees.len() != n {
        return Err(Error::ShapeMismatch {
            op: "rotate",
            expected: alloc::vec![n],
            actual: alloc::vec![degrees.len()],
        });
    }
    if let Some(bad) = degrees.iter().find(|d| !d.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!("rotation angle {bad} is not finite")));
    }
    let mut out = Tensor::zeros(x.shape());
    let plane = h * w;
    for (b, &deg) in degrees.iter().enumerate() {
        for ch in 0..c {
            let off = (b * c + ch) * plane;
            let src = &x.data()[off..off + plane];
            let dst = &mut out.data_mut()[off..off + plane];
            match quarter_turns(deg) {
                Some(q) if h == w || q % 2 == 0 => rotate_exact(src, dst, h, w, q),
                _ => rotate_bilinear(src, dst, h, w, deg),
            }
        }
    }
    Ok(out)
}

fn rotate_exact<T: Real>(src: &[T], dst: &mut [T], h: usize, w: usize, q: u32) {
    for r in 0..h {
        for c in 0..w {
            let (sr, sc) = match q {
                0 => (r, c),
                1 => (c, w - 1 - r),
                2 => (h - 1 - r, w - 1 - c),
                _ => (h - 1 - c, r),
            };
            dst[r * w + c] = src[sr * w + sc];
        }
    }
}

fn rotate_bilinear<T: Real>(src: &[T], dst: &mut [T], h: usize, w: usize, deg: f64) {
    let a = deg.to_radians();
    let (s, co) = (a.sin(), a.cos());
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let px = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            0.0
        } else {
            src[r as usize * w + c as usize].to_f64_lossy()
        }
    };
    for r in 0..h {
        for c in 0..w {
            let y = r as f64 - cy;
            let x = c as f64 - cx;
            let sy = cy + y * co + x * s;
            let sx = cx + x * co - y * s;
            let (y0, x0) = (sy.floor(), sx.floor());
            let (fy, fx) = (sy - y0, sx - x0);
            let (y0, x0) = (y0 as isize, x0 as isize);
            let v = (1.0 - fy) * ((1.0 - fx) * px(y0, x0) + fx * px(y0, x0 + 1))
                + fy * ((1.0 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
            dst[r * w + c] = T::from_f64_lossy(v);
        }
    }
}

/// Rotate each image by an angle drawn uniformly from `[-max_abs, max_abs]` degrees.
pub fn random_rotate<T: Real, R: Rng + ?Sized>(x: &Tensor<T>, max_abs: f64, rng: &mut R) -> Result<Tensor<T>> {
    let n = x.dims4("random_rotate")?[0];
    let angles: Vec<f64> = (0..n)
        .map(|_| if max_abs > 0.0 { rng.random_range(-max_abs..=max_abs) } else { 0.0 })
        .collect();
    rotate_each(x, &angles)
}

/// Add i.i.d. `N(mean, std²)` noise and clamp to `[0, 1]`.
pub fn gaussian_perturb<T: Real, R: Rng + ?Sized>(x: &Tensor<T>, mean: f64, std: f64, rng: &mut R) -> Result<Tensor<T>> {
    if std == 0.0 && mean == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(mean, std)
        .map_err(|e| Error::InvalidConfig(alloc::format!("noise parameters mean {mean} std {std}: {e}")))?;
    Ok(x.map(|v| {
        let y = v.to_f64_lossy() + normal.sample(rng);
        T::from_f64_lossy(y.clamp(0.0, 1.0))
    }))
}

/// The raw (unclamped) noise draws used by [`gaussian_perturb`].
pub fn gaussian_noise<R: Rng + ?Sized>(n: usize, mean: f64, std: f64, rng: &mut R) -> Result<Vec<f64>> {
    let normal = Normal::new(mean, std)
        .map_err(|e| Error::InvalidConfig(alloc::format!("noise parameters mean {mean} std {std}: {e}")))?;
    Ok((0..n).map(|_| normal.sample(rng)).collect())
}
