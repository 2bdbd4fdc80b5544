//! Multispectral satellite image segmentation.
//!
//! The crate covers the full path from raw sensor bands to per-class masks:
//!
//! - [`raster`]: multispectral rasters, label masks, the MSR container format,
//!   normalization, resampling and band stacking.
//! - [`pansharpen`]: Brovey and weighted-mean fusion of a panchromatic band
//!   with lower-resolution multispectral bands.
//! - [`indices`]: CCCI / NDWI / NDVI reflectance indices, thresholding,
//!   connected components and the area-based waterway / standing-water split.
//! - [`patchwork`]: dihedral augmentation, patch sampling, reflection padding,
//!   tiled prediction with exact-cover stitching and boundary-loss profiling.
//! - [`neuralnet`]: a from-scratch U-Net with manual backpropagation, the joint
//!   BCE / soft-Jaccard objective, Nadam and finite-difference gradient checks.
//! - [`pipeline`]: synthetic scenes, per-class training, prediction,
//!   evaluation and class statistics, plus the command-line front end.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod error;
pub mod indices;
pub mod neuralnet;
pub mod pansharpen;
pub mod patchwork;
pub mod pipeline;
pub mod raster;

pub use error::{Error, ErrorKind, Result};
