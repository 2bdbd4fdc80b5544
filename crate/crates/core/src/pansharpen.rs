//! Fusion of a panchromatic band with lower-resolution multispectral bands.

use crate::error::{Error, Result};
use crate::raster::{bilinear_plane, BandName, MultispectralRaster};

/// Intensity below this copies the upsampled multispectral value through.
pub const INTENSITY_EPSILON: f32 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SharpenMethod {
    /// `out_i = up(ms_i) * pan / intensity`.
    Brovey,
    /// `out_i = (1 - w) * up(ms_i) + w * pan`.
    WeightedMean(f32),
}

/// Bands averaged into the Brovey intensity: the ones overlapping the
/// 450-800 nm panchromatic range.
pub const DEFAULT_INTENSITY_BANDS: [BandName; 4] =
    [BandName::Blue, BandName::Green, BandName::Red, BandName::RedEdge];

/// Pan-sharpens `ms` onto the grid of `pan` using the default intensity bands.
pub fn pansharpen(
    pan: &MultispectralRaster,
    ms: &MultispectralRaster,
    method: SharpenMethod,
) -> Result<MultispectralRaster> {
    pansharpen_with(pan, ms, method, &DEFAULT_INTENSITY_BANDS)
}

/// Like [`pansharpen`] with an explicit intensity band set. Bands missing
/// from `ms` are skipped; if none are present all `ms` bands are averaged.
pub fn pansharpen_with(
    pan: &MultispectralRaster,
    ms: &MultispectralRaster,
    method: SharpenMethod,
    intensity_bands: &[BandName],
) -> Result<MultispectralRaster> {
    if pan.band_count() != 1 {
        return Err(Error::InvalidArgument(format!(
            "panchromatic raster must have exactly one band, got {}",
            pan.band_count()
        )));
    }
    let (pw, ph) = (pan.width(), pan.height());
    let (mw, mh) = (ms.width(), ms.height());
    if mw == 0 || mh == 0 || pw % mw != 0 || ph % mh != 0 {
        return Err(Error::ResolutionMismatch(format!(
            "pan {pw}x{ph} vs multispectral {mw}x{mh}"
        )));
    }
    if let SharpenMethod::WeightedMean(w) = method {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArgument(format!("weight {w} outside [0, 1]")));
        }
    }

    let pan_values = pan.band_f32(0);
    let upsampled: Vec<Vec<f32>> = (0..ms.band_count())
        .map(|i| {
            let band = ms.band_f32(i);
            if (mw, mh) == (pw, ph) {
                band
            } else {
                bilinear_plane(&band, mw, mh, pw, ph)
            }
        })
        .collect();

    let planes = match method {
        SharpenMethod::WeightedMean(w) => upsampled
            .iter()
            .map(|band| {
                band.iter()
                    .zip(&pan_values)
                    .map(|(&m, &p)| if w == 0.0 { m } else { (1.0 - w) * m + w * p })
                    .collect()
            })
            .collect(),
        SharpenMethod::Brovey => {
            let mut used: Vec<usize> = intensity_bands.iter().filter_map(|b| ms.band_index(b)).collect();
            if used.is_empty() {
                used = (0..ms.band_count()).collect();
            }
            let inv_count = 1.0 / used.len() as f32;
            let intensity: Vec<f32> = (0..pw * ph)
                .map(|p| used.iter().map(|&b| upsampled[b][p]).sum::<f32>() * inv_count)
                .collect();
            upsampled
                .iter()
                .map(|band| {
                    band.iter()
                        .zip(&pan_values)
                        .zip(&intensity)
                        .map(|((&m, &p), &i)| if i < INTENSITY_EPSILON { m } else { m * p / i })
                        .collect()
                })
                .collect()
        }
    };

    let mut out = MultispectralRaster::from_f32_planes(pw, ph, ms.bands().to_vec(), planes)?;
    if let Some(res) = pan.ground_resolution() {
        out = out.with_ground_resolution(res);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{resample, ResampleMethod};

    fn constant(w: usize, h: usize, bands: Vec<BandName>, values: &[f32]) -> MultispectralRaster {
        let planes = values.iter().map(|&v| vec![v; w * h]).collect();
        MultispectralRaster::from_f32_planes(w, h, bands, planes).unwrap()
    }

    fn rgb() -> Vec<BandName> {
        vec![BandName::Red, BandName::Green, BandName::Blue]
    }

    #[test]
    fn brovey_uniform_scene() {
        let ms = constant(2, 2, rgb(), &[0.5, 0.5, 0.5]);
        let pan = constant(8, 8, vec![BandName::Pan], &[0.6]);
        let out = pansharpen(&pan, &ms, SharpenMethod::Brovey).unwrap();
        assert_eq!((out.width(), out.height()), (8, 8));
        assert_eq!(out.bands(), ms.bands());
        for i in 0..3 {
            assert!(out.band_f32(i).iter().all(|&v| (v - 0.6).abs() < 1e-6));
        }
    }

    #[test]
    fn brovey_with_pan_equal_to_intensity_returns_upsampled_ms() {
        let w = 3;
        let ms = MultispectralRaster::from_f32_planes(
            w,
            w,
            rgb(),
            vec![
                (0..9).map(|i| 0.1 + 0.05 * i as f32).collect(),
                (0..9).map(|i| 0.7 - 0.03 * i as f32).collect(),
                (0..9).map(|i| 0.2 + 0.01 * (i * i) as f32).collect(),
            ],
        )
        .unwrap();
        let up = resample(&ms, 6, 6, ResampleMethod::Bilinear).unwrap();
        let mean: Vec<f32> = (0..36)
            .map(|p| (0..3).map(|b| up.band_f32(b)[p]).sum::<f32>() / 3.0)
            .collect();
        let pan = MultispectralRaster::from_f32_planes(6, 6, vec![BandName::Pan], vec![mean]).unwrap();
        let out = pansharpen(&pan, &ms, SharpenMethod::Brovey).unwrap();
        for b in 0..3 {
            for (o, u) in out.band_f32(b).iter().zip(up.band_f32(b)) {
                assert!((o - u).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn weighted_mean_endpoints() {
        let ms = MultispectralRaster::from_f32_planes(
            2,
            2,
            vec![BandName::Red, BandName::Nir1],
            vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.9, 0.8, 0.7, 0.6]],
        )
        .unwrap();
        let pan = constant(4, 4, vec![BandName::Pan], &[0.33]);
        let up = resample(&ms, 4, 4, ResampleMethod::Bilinear).unwrap();

        let w0 = pansharpen(&pan, &ms, SharpenMethod::WeightedMean(0.0)).unwrap();
        assert_eq!(w0.data(), up.data());

        let w1 = pansharpen(&pan, &ms, SharpenMethod::WeightedMean(1.0)).unwrap();
        for b in 0..2 {
            assert!(w1.band_f32(b).iter().all(|&v| v == 0.33));
        }
    }

    #[test]
    fn dark_pixels_copy_multispectral_values() {
        let ms = constant(1, 1, rgb(), &[0.0, 0.0, 0.0]);
        let pan = constant(2, 2, vec![BandName::Pan], &[0.9]);
        let out = pansharpen(&pan, &ms, SharpenMethod::Brovey).unwrap();
        for b in 0..3 {
            assert!(out.band_f32(b).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn errors() {
        let ms = constant(3, 3, rgb(), &[0.5, 0.5, 0.5]);
        let pan = constant(8, 8, vec![BandName::Pan], &[0.6]);
        assert!(matches!(
            pansharpen(&pan, &ms, SharpenMethod::Brovey),
            Err(Error::ResolutionMismatch(_))
        ));
        let two = constant(6, 6, vec![BandName::Pan, BandName::Red], &[0.6, 0.1]);
        assert!(pansharpen(&two, &ms, SharpenMethod::Brovey).is_err());
        let pan = constant(6, 6, vec![BandName::Pan], &[0.6]);
        assert!(pansharpen(&pan, &ms, SharpenMethod::WeightedMean(1.5)).is_err());
    }
}
