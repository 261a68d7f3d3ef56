//! Minimal differentiable compute core: the three-layer residual denoiser,
//! fixed linear image operators, L1 reduction and SGD.

pub mod checkpoint;
pub mod network;
pub mod ops;
pub mod params;
mod scalar;

pub use network::{forward, Activations};
pub use ops::{
    gaussian3x3, gaussian3x3_adjoint, image_gradient, image_gradient_adjoint, l1_mean,
    l1_mean_grad, leaky_relu, leaky_relu_grad,
};
pub use params::{DenoiserParams, GradientAccumulator, CHANNELS, LEAKY_SLOPE, PARAM_COUNT};
pub use scalar::Scalar;
