//! Compression of 3D Gaussian splat clouds through 2D attribute maps.
//!
//! The encoder sorts primitives along a 3D Morton curve, lays them out on a
//! square grid in 2D Morton order, reduces the 45 SH AC channels with PCA,
//! refines the layout blockwise with MiniPLAS, and packs the result into
//! 7 + k/3 three-channel 10-bit images that are coded one by one through a
//! pluggable codec backend.

pub mod cloud;
pub mod codec;
pub mod container;
pub mod error;
pub mod layout;
pub mod maps;
pub mod metrics;
pub mod morton;
pub mod pca;
pub mod pipeline;
pub mod plas;
pub mod ply;
pub mod quant;
pub mod synth;

pub use cloud::GaussianCloud;
pub use error::{Error, ErrorClass, Result};
