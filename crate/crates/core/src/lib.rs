//! Omnidirectional salient-object-detection toolkit.
//!
//! * [`tensor`]: dense feature tensors and the convolution / SE / resampling
//!   kernels everything else is composed from.
//! * [`projection`]: equirectangular <-> cube-map resampling, 4-3 cube
//!   unfolding and the cube-to-equirectangular feature projection.
//! * [`dwf`] and [`fr`]: the gated/weighted multi-projection fusion and the
//!   decoder filtration-and-refinement block.
//! * [`pipeline`]: a deterministic end-to-end forward pass over a stub
//!   encoder, with ablation switches.
//! * [`metrics`] and [`loss`]: saliency evaluation measures and the BCE
//!   supervision loss.

pub mod config;
pub mod dwf;
pub mod error;
pub mod fixtures;
pub mod fr;
pub mod image_io;
pub mod loss;
pub mod metrics;
pub mod oracle;
pub mod params;
pub mod pipeline;
pub mod projection;
pub mod rng;
pub mod selftest;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Shape, Tensor};
