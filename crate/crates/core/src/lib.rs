//! Geometric operator convolution.
//!
//! Convolution layers whose kernels are regenerated on every forward pass from
//! a handful of geometric-operator parameters (Gabor, Schmid), trained by
//! chaining the kernel gradient through the generator Jacobian. The crate also
//! carries the numeric substrate those layers need (dense tensors, conv/fc/pool
//! kernels, losses, optimizers, a training loop), a rank-based injectivity
//! certifier for the first-layer linear map, and pure image perturbations used
//! by the robustness experiments.
//!
//! Everything here is allocation-only: no file or console IO. The companion
//! `gocnn` crate carries dataset loaders, checkpoints, reports and the CLI.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod generators;
pub mod go_conv;
pub mod injectivity;
pub mod linalg;
pub mod network;
pub mod ops;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod train;
pub mod transforms;

pub use error::{Error, Result};
pub use generators::{GaborParams, GeneratorKind, GeneratorSpec, KernelBank, SchmidParams};
pub use go_conv::GoConvLayer;
pub use network::{GeneratorMix, LayerSpec, Model, NetworkConfig};
pub use scalar::{DType, Real};
pub use tensor::Tensor;
