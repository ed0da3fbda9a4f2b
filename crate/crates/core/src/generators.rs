//! Kernel generator functions.
//!
//! A generator maps a short parameter vector `p ∈ ℝⁿ` to an `m×m` kernel.
//! Three kinds exist:
//!
//! * **Gabor** (n = 5): `exp(−(x'² + γ²y'²)/(2σ²)) · cos(2πx'/λ + ψ)` with
//!   `x' = x cosθ + y sinθ`, `y' = −x sinθ + y cosθ`.
//! * **Schmid** (n = 2): `exp(−r²/(2σ²)) · cos(2πτr/σ)`, `r = √(x²+y²)`.
//! * **Free** (n = m²): the identity generator of an ordinary conv layer.
//!
//! Coordinates: kernel entry `(i, j)` sits at `x = i − (m−1)/2` (row) and
//! `y = j − (m−1)/2` (column). Every generator and every test uses
//! [`grid_coords`]; there is no other convention in the crate.
//!
//! Trainable ("raw") parameters are unconstrained. [`constrain`] maps them to
//! the valid domain: `σ = e^{raw_σ}`, `γ = e^{raw_γ}`, `λ = λ_min + e^{raw_λ}`;
//! angles and τ pass through. Raw order is `(θ, ψ, σ, γ, λ)` for Gabor and
//! `(σ, τ)` for Schmid, matching the Jacobian columns.

use alloc::vec;
use alloc::vec::Vec;

#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::tensor::Tensor;

/// Lower bound added to the wavelength so `2πx'/λ` stays bounded.
pub const LAMBDA_MIN: f64 = 0.1;

pub const GABOR_PARAMS: usize = 5;
pub const SCHMID_PARAMS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Gabor,
    Schmid,
    Free,
}

impl GeneratorKind {
    /// Parameter count `n` for kernel size `m`.
    pub fn param_count(self, m: usize) -> usize {
        match self {
            GeneratorKind::Gabor => GABOR_PARAMS,
            GeneratorKind::Schmid => SCHMID_PARAMS,
            GeneratorKind::Free => m * m,
        }
    }
}

/// Kernel-centred coordinates of entry `(i, j)` in an `m×m` kernel.
pub fn grid_coords(m: usize, i: usize, j: usize) -> (f64, f64) {
    debug_assert!(m % 2 == 1 && i < m && j < m);
    let half = ((m - 1) / 2) as f64;
    (i as f64 - half, j as f64 - half)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborParams {
    pub theta: f64,
    pub psi: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl GaborParams {
    pub fn is_valid(&self) -> bool {
        self.sigma > 0.0 && self.gamma > 0.0 && self.lambda.abs() >= LAMBDA_MIN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchmidParams {
    pub sigma: f64,
    pub tau: f64,
}

/// Gabor kernel value and its partials `(θ, ψ, σ, γ, λ)` at one point.
fn gabor_point<T: Real>(p: &[T; 5], x: T, y: T, with_grad: bool) -> (T, [T; 5]) {
    let [theta, psi, sigma, gamma, lambda] = *p;
    let (s, c) = theta.sin_cos();
    let xp = x * c + y * s;
    let yp = -x * s + y * c;
    let two = lit::<T>(2.0);
    let tau = T::TAU();
    let s2 = sigma * sigma;
    let g2 = gamma * gamma;
    let q = xp * xp + g2 * yp * yp;
    let env = (-q / (two * s2)).exp();
    let phase = tau * xp / lambda + psi;
    let (sn, cs) = phase.sin_cos();
    let value = env * cs;
    if !with_grad {
        return (value, [T::zero(); 5]);
    }
    // ∂x'/∂θ = y', ∂y'/∂θ = −x'
    let d_theta = value * (-(xp * yp * (T::one() - g2)) / s2) - env * sn * tau * yp / lambda;
    let d_psi = -env * sn;
    let d_sigma = value * q / (s2 * sigma);
    let d_gamma = -value * gamma * yp * yp / s2;
    let d_lambda = env * sn * tau * xp / (lambda * lambda);
    (value, [d_theta, d_psi, d_sigma, d_gamma, d_lambda])
}

/// Schmid kernel value and its partials `(σ, τ)` at one point.
fn schmid_point<T: Real>(p: &[T; 2], x: T, y: T, with_grad: bool) -> (T, [T; 2]) {
    let [sigma, tau] = *p;
    let r2 = x * x + y * y;
    let r = r2.sqrt();
    let two = lit::<T>(2.0);
    let env = (-r2 / (two * sigma * sigma)).exp();
    let w = T::TAU() * tau / sigma;
    let (sn, cs) = (w * r).sin_cos();
    let value = env * cs;
    if !with_grad {
        return (value, [T::zero(); 2]);
    }
    let d_sigma = value * r2 / (sigma * sigma * sigma) + env * sn * w * r / sigma;
    let d_tau = -env * sn * T::TAU() * r / sigma;
    (value, [d_sigma, d_tau])
}

fn fill_kernel<T: Real, const N: usize>(
    m: usize,
    point: impl Fn(T, T, bool) -> (T, [T; N]),
    kernel: &mut [T],
    jac: Option<&mut [T]>,
) {
    let want = jac.is_some();
    let mut jac = jac;
    for i in 0..m {
        for j in 0..m {
            let (x, y) = grid_coords(m, i, j);
            let (v, d) = point(lit(x), lit(y), want);
            kernel[i * m + j] = v;
            if let Some(jac) = jac.as_deref_mut() {
                jac[(i * m + j) * N..(i * m + j + 1) * N].copy_from_slice(&d);
            }
        }
    }
}

fn gabor_array<T: Real>(p: &GaborParams) -> [T; 5] {
    [lit(p.theta), lit(p.psi), lit(p.sigma), lit(p.gamma), lit(p.lambda)]
}

/// `m×m` Gabor kernel, row-major.
pub fn gabor_kernel<T: Real>(p: &GaborParams, m: usize) -> Vec<T> {
    let arr = gabor_array::<T>(p);
    let mut k = vec![T::zero(); m * m];
    fill_kernel(m, |x, y, g| gabor_point(&arr, x, y, g), &mut k, None);
    k
}

/// `m×m×5` array: entry `[(i·m + j)·5 + t]` is `∂kernel[i,j]/∂(θ,ψ,σ,γ,λ)[t]`.
pub fn gabor_jacobian<T: Real>(p: &GaborParams, m: usize) -> Vec<T> {
    let arr = gabor_array::<T>(p);
    let mut k = vec![T::zero(); m * m];
    let mut jac = vec![T::zero(); m * m * GABOR_PARAMS];
    fill_kernel(m, |x, y, g| gabor_point(&arr, x, y, g), &mut k, Some(&mut jac));
    jac
}

pub fn schmid_kernel<T: Real>(p: &SchmidParams, m: usize) -> Vec<T> {
    let arr = [lit::<T>(p.sigma), lit::<T>(p.tau)];
    let mut k = vec![T::zero(); m * m];
    fill_kernel(m, |x, y, g| schmid_point(&arr, x, y, g), &mut k, None);
    k
}

/// `m×m×2` array of partials w.r.t. `(σ, τ)`.
pub fn schmid_jacobian<T: Real>(p: &SchmidParams, m: usize) -> Vec<T> {
    let arr = [lit::<T>(p.sigma), lit::<T>(p.tau)];
    let mut k = vec![T::zero(); m * m];
    let mut jac = vec![T::zero(); m * m * SCHMID_PARAMS];
    fill_kernel(m, |x, y, g| schmid_point(&arr, x, y, g), &mut k, Some(&mut jac));
    jac
}

/// Maps raw parameters to the constrained domain (in place semantics on a copy).
///
/// Free raw vectors are returned unchanged.
pub fn constrain<T: Real>(raw: &[T], kind: GeneratorKind) -> Vec<T> {
    let mut p = raw.to_vec();
    match kind {
        GeneratorKind::Gabor => {
            p[2] = raw[2].exp();
            p[3] = raw[3].exp();
            p[4] = lit::<T>(LAMBDA_MIN) + raw[4].exp();
        }
        GeneratorKind::Schmid => p[0] = raw[0].exp(),
        GeneratorKind::Free => {}
    }
    p
}

/// Inverse of [`constrain`].
pub fn unconstrain<T: Real>(params: &[T], kind: GeneratorKind) -> Vec<T> {
    let mut r = params.to_vec();
    match kind {
        GeneratorKind::Gabor => {
            r[2] = params[2].ln();
            r[3] = params[3].ln();
            r[4] = (params[4] - lit::<T>(LAMBDA_MIN)).ln();
        }
        GeneratorKind::Schmid => r[0] = params[0].ln(),
        GeneratorKind::Free => {}
    }
    r
}

/// `d constrained / d raw`, one factor per parameter (diagonal).
fn constraint_scale<T: Real>(params: &[T], kind: GeneratorKind) -> Vec<T> {
    let mut d = vec![T::one(); params.len()];
    match kind {
        GeneratorKind::Gabor => {
            d[2] = params[2];
            d[3] = params[3];
            d[4] = params[4] - lit::<T>(LAMBDA_MIN);
        }
        GeneratorKind::Schmid => d[0] = params[0],
        GeneratorKind::Free => {}
    }
    d
}

impl GaborParams {
    pub fn to_raw(&self) -> [f64; 5] {
        let r = unconstrain(&[self.theta, self.psi, self.sigma, self.gamma, self.lambda], GeneratorKind::Gabor);
        [r[0], r[1], r[2], r[3], r[4]]
    }

    pub fn from_raw(raw: &[f64]) -> Self {
        let p = constrain(raw, GeneratorKind::Gabor);
        Self {
            theta: p[0],
            psi: p[1],
            sigma: p[2],
            gamma: p[3],
            lambda: p[4],
        }
    }
}

impl SchmidParams {
    pub fn to_raw(&self) -> [f64; 2] {
        [self.sigma.ln(), self.tau]
    }

    pub fn from_raw(raw: &[f64]) -> Self {
        Self {
            sigma: raw[0].exp(),
            tau: raw[1],
        }
    }
}

/// One kernel slice: which generator, its size and its raw parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec<T> {
    pub kind: GeneratorKind,
    pub m: usize,
    pub raw: Vec<T>,
}

impl<T: Real> GeneratorSpec<T> {
    pub fn new(kind: GeneratorKind, m: usize, raw: Vec<T>) -> Result<Self> {
        let spec = Self { kind, m, raw };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gabor(p: &GaborParams, m: usize) -> Self {
        Self {
            kind: GeneratorKind::Gabor,
            m,
            raw: p.to_raw().iter().map(|&v| lit(v)).collect(),
        }
    }

    pub fn schmid(p: &SchmidParams, m: usize) -> Self {
        Self {
            kind: GeneratorKind::Schmid,
            m,
            raw: p.to_raw().iter().map(|&v| lit(v)).collect(),
        }
    }

    pub fn free(kernel: Vec<T>, m: usize) -> Self {
        Self {
            kind: GeneratorKind::Free,
            m,
            raw: kernel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m.is_multiple_of(2) {
            return Err(Error::InvalidSpec(alloc::format!("kernel size must be odd, got {}", self.m)));
        }
        let n = self.kind.param_count(self.m);
        if self.raw.len() != n {
            return Err(Error::InvalidSpec(alloc::format!(
                "{:?} expects {} raw parameters, got {}",
                self.kind,
                n,
                self.raw.len()
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.kind.param_count(self.m)
    }

    /// Kernel and `∂kernel/∂raw` (`m²×n`, row-major), evaluated together.
    pub fn materialize(&self, with_jacobian: bool) -> (Vec<T>, Option<Vec<T>>) {
        let m = self.m;
        match self.kind {
            GeneratorKind::Free => {
                let jac = with_jacobian.then(|| {
                    let n = m * m;
                    let mut j = vec![T::zero(); n * n];
                    for t in 0..n {
                        j[t * n + t] = T::one();
                    }
                    j
                });
                (self.raw.clone(), jac)
            }
            GeneratorKind::Gabor => {
                let p = constrain(&self.raw, self.kind);
                let arr = [p[0], p[1], p[2], p[3], p[4]];
                self.eval(&arr, |a, x, y, g| gabor_point(a, x, y, g), &p, with_jacobian)
            }
            GeneratorKind::Schmid => {
                let p = constrain(&self.raw, self.kind);
                let arr = [p[0], p[1]];
                self.eval(&arr, |a, x, y, g| schmid_point(a, x, y, g), &p, with_jacobian)
            }
        }
    }

    fn eval<const N: usize>(
        &self,
        arr: &[T; N],
        point: impl Fn(&[T; N], T, T, bool) -> (T, [T; N]),
        constrained: &[T],
        with_jacobian: bool,
    ) -> (Vec<T>, Option<Vec<T>>) {
        let m = self.m;
        let mut k = vec![T::zero(); m * m];
        if !with_jacobian {
            fill_kernel(m, |x, y, g| point(arr, x, y, g), &mut k, None);
            return (k, None);
        }
        let mut jac = vec![T::zero(); m * m * N];
        fill_kernel(m, |x, y, g| point(arr, x, y, g), &mut k, Some(&mut jac));
        let scale = constraint_scale(constrained, self.kind);
        for row in jac.chunks_exact_mut(N) {
            for (v, &s) in row.iter_mut().zip(&scale) {
                *v = *v * s;
            }
        }
        (k, Some(jac))
    }

    /// Draw initial raw parameters.
    ///
    /// Gabor: θ ~ U[0,π), ψ ~ U[0,2π), raw σ, raw γ ~ U[−0.5,0.5], λ ~ U[2,2m].
    /// Schmid: raw σ ~ U[−0.5,1], τ ~ U[0.5,2]. Free: U(±1/√fan_in).
    pub fn init<R: Rng + ?Sized>(kind: GeneratorKind, m: usize, fan_in: usize, rng: &mut R) -> Self {
        let raw: Vec<f64> = match kind {
            GeneratorKind::Gabor => {
                let theta = rng.random_range(0.0..core::f64::consts::PI);
                let psi = rng.random_range(0.0..core::f64::consts::TAU);
                let rs = rng.random_range(-0.5..=0.5);
                let rg = rng.random_range(-0.5..=0.5);
                let lambda: f64 = rng.random_range(2.0..=(2 * m).max(2) as f64);
                let rl = num_traits::Float::ln(lambda - LAMBDA_MIN);
                vec![theta, psi, rs, rg, rl]
            }
            GeneratorKind::Schmid => {
                vec![rng.random_range(-0.5..=1.0), rng.random_range(0.5..=2.0)]
            }
            GeneratorKind::Free => {
                let bound = 1.0 / num_traits::Float::sqrt(fan_in as f64);
                (0..m * m).map(|_| rng.random_range(-bound..bound)).collect()
            }
        };
        Self {
            kind,
            m,
            raw: raw.into_iter().map(lit).collect(),
        }
    }
}

/// Concatenated bank `[f(p¹), …, f(p^od)]` of generated kernels with their
/// raw-parameter Jacobians.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank<T> {
    pub kernels: Tensor<T>,
    /// One `m²×n` row-major Jacobian per spec, same order as `specs`.
    pub jacobians: Vec<Vec<T>>,
    /// `od·c` specs in row-major `(o, c)` order.
    pub specs: Vec<GeneratorSpec<T>>,
}

impl<T: Real> KernelBank<T> {
    pub fn od(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn m(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn param_count(&self) -> usize {
        self.specs.iter().map(GeneratorSpec::param_count).sum()
    }
}

/// Generate `kernels[o, c]` from `specs[o·c_count + c]`.
pub fn build_bank<T: Real>(specs: &[GeneratorSpec<T>], od: usize, c: usize) -> Result<KernelBank<T>> {
    if specs.len() != od * c || specs.is_empty() {
        return Err(Error::InvalidSpec(alloc::format!(
            "bank of {od}x{c} slices needs {} specs, got {}",
            od * c,
            specs.len()
        )));
    }
    let m = specs[0].m;
    let mut kernels = Tensor::zeros(&[od, c, m, m]);
    let mut jacobians = Vec::with_capacity(specs.len());
    for (idx, spec) in specs.iter().enumerate() {
        spec.validate()?;
        if spec.m != m {
            return Err(Error::InvalidSpec(alloc::format!(
                "inconsistent kernel sizes in bank: {} and {}",
                m,
                spec.m
            )));
        }
        let (k, jac) = spec.materialize(true);
        kernels.data_mut()[idx * m * m..(idx + 1) * m * m].copy_from_slice(&k);
        jacobians.push(jac.unwrap_or_default());
    }
    Ok(KernelBank {
        kernels,
        jacobians,
        specs: specs.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn grid_convention() {
        assert_eq!(grid_coords(3, 1, 1), (0.0, 0.0));
        assert_eq!(grid_coords(3, 0, 1), (-1.0, 0.0));
        assert_eq!(grid_coords(5, 0, 0), (-2.0, -2.0));
    }

    #[test]
    fn gabor_unit_case() {
        let p = GaborParams {
            theta: 0.0,
            psi: 0.0,
            sigma: 1.0,
            gamma: 1.0,
            lambda: 1.0,
        };
        let k = gabor_kernel::<f64>(&p, 3);
        assert!(close(k[4], 1.0, 1e-15));
        for idx in [1, 3, 5, 7] {
            assert!(close(k[idx], 0.606_530_659_712_633_4, 1e-12), "{idx}: {}", k[idx]);
        }
        for idx in [0, 2, 6, 8] {
            assert!(close(k[idx], 0.367_879_441_171_442_3, 1e-12), "{idx}: {}", k[idx]);
        }
    }

    #[test]
    fn quarter_phase_zeroes_center() {
        let p = GaborParams {
            theta: 0.7,
            psi: PI / 2.0,
            sigma: 1.3,
            gamma: 0.4,
            lambda: 2.5,
        };
        assert!(gabor_kernel::<f64>(&p, 5)[12].abs() < 1e-15);
    }

    #[test]
    fn center_partials_vanish() {
        let p = GaborParams {
            theta: 0.3,
            psi: 0.0,
            sigma: 0.9,
            gamma: 1.7,
            lambda: 3.0,
        };
        let j = gabor_jacobian::<f64>(&p, 3);
        let center = &j[4 * 5..5 * 5];
        assert_eq!(center[1], 0.0); // ∂ψ = −sin(0)
        assert_eq!(center[2], 0.0); // ∂σ
    }

    #[test]
    fn schmid_reference_values() {
        let p = SchmidParams { sigma: 2.0, tau: 1.0 };
        let k = schmid_kernel::<f64>(&p, 3);
        assert_eq!(k[4], 1.0);
        // (x, y) = (1, 0) is entry (2, 1).
        assert!(close(k[7], -0.882_496_902_584_595_4, 1e-12), "{}", k[7]);
        assert_eq!(k[1], k[3]);
        assert_eq!(k[3], k[5]);
        assert_eq!(k[5], k[7]);
    }

    #[test]
    fn constrain_round_trip_and_unit_sigma() {
        let raw = [0.4f64, -1.0, 0.0, 0.3, -0.2];
        let p = constrain(&raw, GeneratorKind::Gabor);
        assert_eq!(p[2], 1.0);
        let back = unconstrain(&p, GeneratorKind::Gabor);
        for (a, b) in raw.iter().zip(&back) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn bank_rejects_mixed_sizes() {
        let a = GeneratorSpec::<f64>::free(vec![0.0; 9], 3);
        let b = GeneratorSpec::<f64>::free(vec![0.0; 25], 5);
        assert!(build_bank(&[a.clone(), b], 2, 1).is_err());
        assert!(build_bank(&[a], 2, 1).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(GeneratorSpec::<f64>::new(GeneratorKind::Gabor, 3, vec![0.0; 4]).is_err());
        assert!(GeneratorSpec::<f64>::new(GeneratorKind::Free, 4, vec![0.0; 16]).is_err());
        assert!(GeneratorSpec::<f64>::new(GeneratorKind::Schmid, 5, vec![0.0; 2]).is_ok());
    }

    #[test]
    fn all_gabor_bank_param_count() {
        let mut rng = crate::rng::stream_rng(3, 0);
        let specs: Vec<_> = (0..32)
            .map(|_| GeneratorSpec::<f64>::init(GeneratorKind::Gabor, 5, 25, &mut rng))
            .collect();
        let bank = build_bank(&specs, 32, 1).unwrap();
        assert_eq!(bank.param_count(), 160);
    }
}
