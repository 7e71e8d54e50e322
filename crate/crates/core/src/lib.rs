//! Defocus blur estimation from a pair of images and sharpness-based
//! evaluation of focus pairs.
//!
//! The blur of each pixel is modelled as a circular Gaussian. Candidate
//! blurred intensities for a grid of scales come from a radial-integral
//! formulation evaluated as a matrix product ([`kernel`]); the scale that
//! best explains the observed intensity is selected per pixel and settled
//! across neighbourhoods ([`estimate`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= 0.0)` also rejects NaN

pub mod blur;
pub mod cache;
pub mod config;
pub mod error;
pub mod estimate;
pub mod image;
pub mod io;
pub mod kernel;
pub mod optics;
pub mod parallel;
pub mod reconstruct;
pub mod resample;
pub mod sharpness;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use estimate::{estimate_blur_map, BlurMap, EstimateParams};
pub use image::{GrayImage, Mask, PaddedImage};
pub use kernel::Framework;
