use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("{op}: {reason}")]
    InvalidShape { op: &'static str, reason: String },

    #[error("{op}: output window is empty (input {input:?}, kernel {kernel}, padding {padding}, stride {stride})")]
    EmptyOutput {
        op: &'static str,
        input: [usize; 2],
        kernel: usize,
        padding: usize,
        stride: usize,
    },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{0} called before forward")]
    MissingCache(&'static str),

    #[error("operator matrix too large: {rows}x{cols} exceeds the {limit} entry guard")]
    SizeGuard { rows: usize, cols: usize, limit: usize },

    #[error("SVD did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("requested {requested} samples but only {available} are available")]
    NotEnoughSamples { requested: usize, available: usize },

    #[error("parameter registry mismatch: {0}")]
    Registry(String),
}
