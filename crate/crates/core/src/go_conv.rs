//! The geometric-operator convolution layer.
//!
//! Forward regenerates the kernel bank from raw generator parameters and
//! runs an ordinary convolution. Backward takes the kernel gradient from the
//! convolution adjoint and contracts it with each slice's Jacobian:
//! `∂L/∂raw_t = Σ_ij ∂L/∂w_ij · ∂w_ij/∂raw_t`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::generators::{build_bank, GeneratorKind, GeneratorSpec, KernelBank};
use crate::ops::conv::{conv2d_backward, conv2d_forward};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
struct GoCache<T> {
    input: Tensor<T>,
    bank: KernelBank<T>,
}

#[derive(Debug, Clone)]
pub struct GoConvLayer<T> {
    od: usize,
    channels: usize,
    m: usize,
    stride: usize,
    padding: usize,
    share_across_in_channels: bool,
    kinds: Vec<GeneratorKind>,
    offsets: Vec<usize>,
    raw: Vec<T>,
    bias: Vec<T>,
    cache: Option<GoCache<T>>,
}

#[derive(Debug, Clone)]
pub struct GoGrads<T> {
    pub input: Option<Tensor<T>>,
    /// Flat, same layout as [`GoConvLayer::raw`].
    pub raw: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> GoConvLayer<T> {
    /// Layer with freshly drawn parameters; `kinds[o]` picks the generator of
    /// every slice in output channel `o`.
    #[allow(clippy::too_many_arguments)]
    pub fn init<R: Rng + ?Sized>(
        kinds: &[GeneratorKind],
        channels: usize,
        m: usize,
        stride: usize,
        padding: usize,
        share_across_in_channels: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let od = kinds.len();
        let fan_in = channels * m * m;
        let per_out = if share_across_in_channels { 1 } else { channels };
        let mut specs = Vec::with_capacity(od * per_out);
        for &kind in kinds {
            for _ in 0..per_out {
                specs.push(GeneratorSpec::init(kind, m, fan_in, rng));
            }
        }
        let bound = 1.0 / num_traits::Float::sqrt(fan_in as f64);
        let bias = (0..od).map(|_| T::from_f64_lossy(rng.random_range(-bound..bound))).collect();
        Self::from_specs(&specs, od, channels, stride, padding, share_across_in_channels, bias)
    }

    /// `specs` holds `od·channels` slices, or `od` when shared across input channels.
    pub fn from_specs(
        specs: &[GeneratorSpec<T>],
        od: usize,
        channels: usize,
        stride: usize,
        padding: usize,
        share_across_in_channels: bool,
        bias: Vec<T>,
    ) -> Result<Self> {
        let slices = if share_across_in_channels { od } else { od * channels };
        if specs.len() != slices || specs.is_empty() {
            return Err(Error::InvalidSpec(alloc::format!(
                "expected {slices} generator slices, got {}",
                specs.len()
            )));
        }
        if bias.len() != od {
            return Err(Error::ShapeMismatch {
                op: "GoConvLayer bias",
                expected: vec![od],
                actual: vec![bias.len()],
            });
        }
        if stride == 0 {
            return Err(Error::InvalidConfig("stride must be positive".into()));
        }
        let m = specs[0].m;
        let mut kinds = Vec::with_capacity(slices);
        let mut offsets = Vec::with_capacity(slices + 1);
        let mut raw = Vec::new();
        for s in specs {
            s.validate()?;
            if s.m != m {
                return Err(Error::InvalidSpec("inconsistent kernel sizes".into()));
            }
            offsets.push(raw.len());
            kinds.push(s.kind);
            raw.extend_from_slice(&s.raw);
        }
        offsets.push(raw.len());
        Ok(Self {
            od,
            channels,
            m,
            stride,
            padding,
            share_across_in_channels,
            kinds,
            offsets,
            raw,
            bias,
            cache: None,
        })
    }

    pub fn od(&self) -> usize {
        self.od
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn stride(&self) -> usize {
        self.stride
    }
    pub fn padding(&self) -> usize {
        self.padding
    }
    pub fn shares_across_in_channels(&self) -> bool {
        self.share_across_in_channels
    }
    pub fn kinds(&self) -> &[GeneratorKind] {
        &self.kinds
    }
    pub fn raw(&self) -> &[T] {
        &self.raw
    }
    pub fn raw_mut(&mut self) -> &mut [T] {
        &mut self.raw
    }
    pub fn bias(&self) -> &[T] {
        &self.bias
    }
    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }
    pub fn raw_and_bias_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.raw, &mut self.bias)
    }

    /// Stored slices as specs (`od` of them when shared, else `od·channels`).
    pub fn specs(&self) -> Vec<GeneratorSpec<T>> {
        self.kinds
            .iter()
            .enumerate()
            .map(|(s, &kind)| GeneratorSpec {
                kind,
                m: self.m,
                raw: self.raw[self.offsets[s]..self.offsets[s + 1]].to_vec(),
            })
            .collect()
    }

    /// Expanded to one spec per `(o, c)` slice, as a bank expects.
    fn bank_specs(&self) -> Vec<GeneratorSpec<T>> {
        let stored = self.specs();
        if !self.share_across_in_channels {
            return stored;
        }
        stored
            .into_iter()
            .flat_map(|s| core::iter::repeat_n(s, self.channels))
            .collect()
    }

    pub fn materialize(&self) -> KernelBank<T> {
        build_bank(&self.bank_specs(), self.od, self.channels).expect("layer specs validated at construction")
    }

    /// Trainable parameters: generator parameters plus one bias per output channel.
    pub fn param_count(&self) -> usize {
        self.raw.len() + self.od
    }

    pub fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let bank = self.materialize();
        let out = conv2d_forward(input, &bank.kernels, &self.bias, self.stride, self.padding)?;
        self.cache = Some(GoCache {
            input: input.clone(),
            bank,
        });
        Ok(out)
    }

    /// Forward without touching the backward cache.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let bank = self.materialize();
        conv2d_forward(input, &bank.kernels, &self.bias, self.stride, self.padding)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>, want_input: bool) -> Result<GoGrads<T>> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache("GoConvLayer::backward"))?;
        let g = conv2d_backward(
            &cache.input,
            &cache.bank.kernels,
            grad_out,
            self.stride,
            self.padding,
            want_input,
        )?;
        let mm = self.m * self.m;
        let gk = g.kernels.data();
        let mut grad_raw = vec![T::zero(); self.raw.len()];
        for (bank_slice, jac) in cache.bank.jacobians.iter().enumerate() {
            let stored = if self.share_across_in_channels {
                bank_slice / self.channels
            } else {
                bank_slice
            };
            let kind = self.kinds[stored];
            let dst = &mut grad_raw[self.offsets[stored]..self.offsets[stored + 1]];
            let gslice = &gk[bank_slice * mm..(bank_slice + 1) * mm];
            if kind == GeneratorKind::Free {
                for (d, &v) in dst.iter_mut().zip(gslice) {
                    *d = *d + v;
                }
                continue;
            }
            let n = dst.len();
            for (t, d) in dst.iter_mut().enumerate() {
                let mut acc = T::zero();
                for (e, &v) in gslice.iter().enumerate() {
                    acc = acc + v * jac[e * n + t];
                }
                *d = *d + acc;
            }
        }
        Ok(GoGrads {
            input: g.input,
            raw: grad_raw,
            bias: g.bias,
        })
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

/// Trainable parameters of an ordinary conv layer: `od·c·m² + od`.
pub fn param_count_common(od: usize, channels: usize, m: usize) -> usize {
    od * channels * m * m + od
}
