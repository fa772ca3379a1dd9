//! Dense and mask-aware MLP numerics: forward/backward passes, Adam with
//! L2 weight decay, and the tanh-squashed Gaussian policy head.

mod adam;
mod gaussian;
mod mlp;

pub use adam::{AdamConfig, AdamState, Moments};
pub use gaussian::{
    clamp_log_std,
    gaussian_head, gaussian_head_with_noise, tanh_gaussian_log_prob, GaussianPolicyOutput,
    LOG_STD_MAX, LOG_STD_MIN, TANH_EPSILON,
};
pub use mlp::{Activation, ForwardCache, Gradients, LayerGrad, LayerParams, Mlp, MlpSpec};
