//! Rank certificates for injectivity of the first-layer linear map.
//!
//! A conv layer (bias aside) is the linear map `I ↦ I ⋆ w`. It is injective
//! iff only `I = 0` maps to zero, i.e. iff its matrix has full column rank.
//! Two matrices are checked:
//!
//! * the **patch matrix** (`od × c·m²`, one flattened kernel per row), the map
//!   restricted to a single receptive field;
//! * the **operator matrix** (`od·H'·W' × c·H·W`), the whole map on an
//!   `H×W` input with the layer's padding and stride.

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{build_bank, GaborParams, GeneratorSpec, KernelBank};
use crate::go_conv::GoConvLayer;
use crate::linalg::{rank, Matrix, DEFAULT_REL_TOL};
use crate::ops::conv::{conv2d_forward, conv_output_extent};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Largest operator matrix (in entries) that will be formed densely.
pub const OPERATOR_ENTRY_LIMIT: usize = 1 << 22;

pub fn patch_matrix<T: Real>(bank: &KernelBank<T>) -> Matrix {
    let od = bank.od();
    let cols = bank.kernels.len() / od;
    Matrix::from_rows(od, cols, bank.kernels.data().iter().map(|v| v.to_f64_lossy()).collect())
}

/// Column `k` is the flattened response to the `k`-th standard-basis image.
pub fn operator_matrix<T: Real>(
    bank: &KernelBank<T>,
    h: usize,
    w: usize,
    padding: usize,
    stride: usize,
) -> Result<Matrix> {
    let (od, c, m) = (bank.od(), bank.channels(), bank.m());
    let empty = || Error::EmptyOutput {
        op: "operator_matrix",
        input: [h, w],
        kernel: m,
        padding,
        stride,
    };
    let oh = conv_output_extent(h, m, padding, stride).ok_or_else(empty)?;
    let ow = conv_output_extent(w, m, padding, stride).ok_or_else(empty)?;
    let cols = c * h * w;
    let rows = od * oh * ow;
    if rows * cols > OPERATOR_ENTRY_LIMIT {
        return Err(Error::SizeGuard {
            rows,
            cols,
            limit: OPERATOR_ENTRY_LIMIT,
        });
    }
    let kernels: Tensor<f64> = bank.kernels.cast();
    let mut basis = Tensor::zeros(&[cols, c, h, w]);
    for k in 0..cols {
        basis.data_mut()[k * cols + k] = 1.0;
    }
    let responses = conv2d_forward(&basis, &kernels, &alloc::vec![0.0; od], stride, padding)?;
    let mut mat = Matrix::zeros(rows, cols);
    for (k, resp) in responses.data().chunks_exact(rows).enumerate() {
        for (r, &v) in resp.iter().enumerate() {
            mat.set(r, k, v);
        }
    }
    Ok(mat)
}

pub fn operator_injective<T: Real>(bank: &KernelBank<T>, h: usize, w: usize, padding: usize) -> Result<bool> {
    let mat = operator_matrix(bank, h, w, padding, 1)?;
    Ok(rank(&mat, DEFAULT_REL_TOL)? == mat.cols)
}

/// `(θ, λ, ψ)` of the five parameter situations used to pin down every
/// entry of a 3×3 patch (the fourth appears with both signs of ψ).
pub fn prop2_situations() -> [(f64, f64, f64); 6] {
    [
        (0.0, 1.0, 0.0),
        (0.0, 3.0, PI / 3.0),
        (0.0, 3.0, -PI / 3.0),
        (PI / 2.0, 3.0, PI / 3.0),
        (PI / 2.0, 3.0, -PI / 3.0),
        (PI / 4.0, 2.0, core::f64::consts::SQRT_2 * PI),
    ]
}

/// One 3×3 Gabor kernel per (situation, σ, γ), single input channel.
pub fn prop2_bank(sigmas: &[f64], gammas: &[f64]) -> KernelBank<f64> {
    situation_bank(&prop2_situations(), sigmas, gammas)
}

/// [`prop2_bank`] over an arbitrary subset of situations.
pub fn situation_bank(situations: &[(f64, f64, f64)], sigmas: &[f64], gammas: &[f64]) -> KernelBank<f64> {
    let mut specs = Vec::new();
    for &(theta, lambda, psi) in situations {
        for &sigma in sigmas {
            for &gamma in gammas {
                let p = GaborParams {
                    theta,
                    psi,
                    sigma,
                    gamma,
                    lambda,
                };
                specs.push(GeneratorSpec::gabor(&p, 3));
            }
        }
    }
    let od = specs.len();
    build_bank(&specs, od, 1).expect("situation specs are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Injective,
    NotInjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub patch_rank: usize,
    /// `c·m²`, the rank a full patch matrix reaches.
    pub required: usize,
    pub operator_rank: usize,
    /// `c·H·W`.
    pub operator_required: usize,
    pub verdict: Verdict,
    /// Patch rank is full but the whole operator is not.
    pub boundary_effect: bool,
}

/// Verdict is injective only when both the patch and the operator matrix
/// have full column rank.
pub fn certify_bank<T: Real>(bank: &KernelBank<T>, h: usize, w: usize, padding: usize, stride: usize) -> Result<Certificate> {
    let patch = patch_matrix(bank);
    let patch_rank = rank(&patch, DEFAULT_REL_TOL)?;
    let op = operator_matrix(bank, h, w, padding, stride)?;
    let operator_rank = rank(&op, DEFAULT_REL_TOL)?;
    let required = patch.cols;
    let operator_required = op.cols;
    // Full operator rank at one size with padding can hold even for a single
    // kernel (a square, generically invertible map); the patch condition is
    // what carries over to every input size.
    let operator_full = operator_rank == operator_required;
    let injective = operator_full && patch_rank == required;
    Ok(Certificate {
        patch_rank,
        required,
        operator_rank,
        operator_required,
        verdict: if injective {
            Verdict::Injective
        } else {
            Verdict::NotInjective
        },
        boundary_effect: patch_rank == required && !operator_full,
    })
}

/// Certify a layer's current kernels on an `H×W` input with its own padding and stride.
pub fn certify_well_defined<T: Real>(layer: &GoConvLayer<T>, h: usize, w: usize) -> Result<Certificate> {
    certify_bank(&layer.materialize(), h, w, layer.padding(), layer.stride())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GeneratorKind;

    fn free_bank(kernels: &[[f64; 9]]) -> KernelBank<f64> {
        let specs: Vec<_> = kernels.iter().map(|k| GeneratorSpec::free(k.to_vec(), 3)).collect();
        build_bank(&specs, kernels.len(), 1).unwrap()
    }

    #[test]
    fn standard_basis_patch_rank() {
        let ks: Vec<[f64; 9]> = (0..9)
            .map(|i| {
                let mut k = [0.0; 9];
                k[i] = 1.0;
                k
            })
            .collect();
        assert_eq!(rank(&patch_matrix(&free_bank(&ks)), DEFAULT_REL_TOL).unwrap(), 9);
    }

    #[test]
    fn zero_bank_not_injective() {
        let bank = free_bank(&[[0.0; 9]; 4]);
        assert_eq!(rank(&patch_matrix(&bank), DEFAULT_REL_TOL).unwrap(), 0);
        let cert = certify_bank(&bank, 6, 6, 1, 1).unwrap();
        assert_eq!(cert.operator_rank, 0);
        assert_eq!(cert.verdict, Verdict::NotInjective);
    }

    #[test]
    fn delta_kernel_operator_is_identity() {
        let mut k = [0.0; 9];
        k[4] = 1.0;
        let bank = free_bank(&[k]);
        let op = operator_matrix(&bank, 5, 7, 1, 1).unwrap();
        for r in 0..op.rows {
            for c in 0..op.cols {
                assert_eq!(op.get(r, c), if r == c { 1.0 } else { 0.0 });
            }
        }
        assert!(operator_injective(&bank, 5, 7, 1).unwrap());
    }

    #[test]
    fn size_guard() {
        let bank = prop2_bank(&[1.0, 2.0], &[1.0, 2.0]);
        assert!(matches!(
            operator_matrix(&bank, 64, 64, 1, 1),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn single_gabor_layer_not_injective() {
        let mut rng = crate::rng::stream_rng(9, 0);
        let layer = GoConvLayer::<f64>::init(&[GeneratorKind::Gabor], 1, 3, 1, 1, false, &mut rng).unwrap();
        let cert = certify_well_defined(&layer, 8, 8).unwrap();
        assert_eq!(cert.patch_rank, 1);
        assert_eq!(cert.verdict, Verdict::NotInjective);
        assert!(!cert.boundary_effect);
    }
}
