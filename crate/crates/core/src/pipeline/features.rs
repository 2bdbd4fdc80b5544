use crate::error::{Error, Result};
use crate::indices::{compute, IndexBands};
use crate::patchwork::PlanarImage;
use crate::raster::{normalize, MultispectralRaster};

use super::FeatureConfig;

/// Turns a scene into network input planes: the selected bands stretched
/// per band to [0, 1], followed by index channels computed on reflectance.
pub fn prepare_features(image: &MultispectralRaster, f: &FeatureConfig) -> Result<PlanarImage> {
    let selected = image.select_bands(&f.bands).map_err(|e| match e {
        Error::MissingBand(b) => Error::BandMismatch(format!(
            "image has bands {:?} but the model needs {b}",
            image.bands().iter().map(|b| b.to_string()).collect::<Vec<_>>()
        )),
        other => other,
    })?;
    let mut planes = normalize(&selected, f.low_pct, f.high_pct)?.raster.planes_f32();
    if !f.index_channels.is_empty() {
        let reflectance = image.to_reflectance();
        let bands = IndexBands { nir: f.nir.clone() };
        for &kind in &f.index_channels {
            let map = compute(&reflectance, kind, &bands)?;
            planes.push(
                map.values
                    .iter()
                    .map(|&v| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) })
                    .collect(),
            );
        }
    }
    PlanarImage::new(image.width(), image.height(), planes)
}
