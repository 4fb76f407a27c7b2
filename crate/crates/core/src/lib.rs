//! Respiratory motion artifacts in MR images: simulate them in k-space,
//! remove them with a GAN-trained dense U-Net, and score the result.
//!
//! All numeric code is generic over [`Scalar`] (`f32` for production,
//! `f64` for verification); the aliases below pin the common choices.

pub mod error;
pub mod image;
pub mod kspace;
pub mod metrics;
pub mod ndauto;
pub mod nets;
pub mod phantom;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use scalar::{Precision, Scalar};

pub type Tensor32 = ndauto::Tensor<f32>;
pub type Tensor64 = ndauto::Tensor<f64>;
pub type Tape32 = ndauto::Tape<f32>;
pub type Tape64 = ndauto::Tape<f64>;
pub type Image32 = image::Image2D<f32>;
pub type Image64 = image::Image2D<f64>;
pub type KSpace32 = kspace::KSpace2D<f32>;
pub type KSpace64 = kspace::KSpace2D<f64>;
pub type WeightStore32 = nets::WeightStore<f32>;
pub type WeightStore64 = nets::WeightStore<f64>;
