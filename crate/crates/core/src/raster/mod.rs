//! Multispectral rasters, label masks and their file format.

mod band;
mod image;
mod mask;
pub mod msr;
mod ops;

pub use band::{BandName, ClassLabel};
pub use image::{Dtype, MultispectralRaster, RasterData};
pub use mask::{BinaryMask, LabelMask};
pub use msr::{load_mask, load_raster, save_mask, save_raster};
pub use ops::{
    bilinear_plane, normalize, percentile_sorted, resample, resample_mask, stack, Normalized,
    ResampleMethod, DEFAULT_HIGH_PCT, DEFAULT_LOW_PCT,
};
