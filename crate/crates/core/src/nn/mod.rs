//! Activation, models, loss and gradients.

pub mod activation;
pub mod loss;
pub mod model;
pub mod network;


pub use activation::Activation;
pub use loss::{argmax, softmax, softmax_xent};
pub use model::{Arch, Block, Layout, ModelSpec, ParamVector};
pub use network::{
    backward, central_differences, forward, grad_fd_oracle, grad_mean, grad_sample, kink_distance,
    loss_seed, max_relative_error, relative_error, sample_loss, ForwardCache, Operators, REL_FLOOR,
};
