//! File formats, dataset loaders, reports and experiment drivers for
//! geometric operator CNNs. The numeric core lives in `gocnn-core`.

pub mod checkpoint;
pub mod cifar;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod idx;
pub mod kernels;
pub mod report;

pub use error::{Error, Result};
