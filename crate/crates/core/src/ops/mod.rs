//! Forward and backward numeric kernels.
//!
//! Every function here is pure: forward passes return whatever the matching
//! backward pass needs, nothing is cached behind the caller's back.

pub mod activation;
pub mod conv;
pub mod linear;
pub mod loss;
pub mod pool;

pub use activation::{relu_backward, relu_forward, sigmoid, sigmoid_backward, sigmoid_forward};
pub use conv::{conv2d_backward, conv2d_forward, conv_output_extent, ConvGrads};
pub use linear::{fc_backward, fc_forward, FcGrads};
pub use loss::{mse_loss, softmax_cross_entropy, LossOutput};
pub use pool::{maxpool2d_backward, maxpool2d_forward, PoolOutput};
