//! Zero-shot denoising of low-angle coherent plane-wave compounded (CPWC)
//! ultrasound images.
//!
//! The working angles of a single acquisition are split by index parity into
//! two compounded sub-images that share anatomy but carry different
//! angle-dependent artifacts. A tiny residual CNN is trained on that pair
//! (plus a gradient-consistency term on the full compound) and its predicted
//! noise is subtracted from the full compound.
//!
//! Modules, bottom-up:
//! - [`compounding`]: angle selection, parity subsets, envelope averaging,
//!   log compression.
//! - [`nn`]: the 3-layer network with hand-written reverse mode.
//! - [`zerotrain`]: losses, the per-image training loop and inference.
//! - [`metrics`]: CNR, gCNR and the two-sample KS speckle test.
//! - [`simulator`]: a seeded speckle/cyst scene and synthetic angle stacks.
//! - [`io`] and [`cli`]: file formats and the `pwzs` command line.

pub mod cli;
pub mod compounding;
pub mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod simulator;
pub mod zerotrain;

pub use compounding::{AngleStack, BModeImage, SubsetPair};
pub use error::{Error, Result};
pub use image::Image2D;
pub use metrics::{MetricsReport, RoiSpec};
pub use nn::{DenoiserParams, GradientAccumulator};
pub use zerotrain::{denoise, train_zero_shot, LossTrace, TrainConfig};
