//! Pan-sharpens a 4x-downsampled synthetic scene back onto the grid of its
//! panchromatic band and reports how close the result is to the original.

use msseg::pansharpen::{pansharpen, SharpenMethod};
use msseg::pipeline::generate_scene;
use msseg::raster::{resample, ResampleMethod};

fn main() -> msseg::Result<()> {
    let scene = generate_scene(1, 0, 256, 1.0)?;
    let full = scene.image.to_reflectance();
    let coarse = resample(&full, 64, 64, ResampleMethod::Bilinear)?;
    let pan = scene.pan.to_reflectance();

    for (name, method) in [
        ("brovey", SharpenMethod::Brovey),
        ("weighted 0.5", SharpenMethod::WeightedMean(0.5)),
    ] {
        let sharp = pansharpen(&pan, &coarse, method)?;
        let naive = resample(&coarse, 256, 256, ResampleMethod::Bilinear)?;
        let err = |a: &msseg::raster::MultispectralRaster| {
            let (x, y) = (a.band_f32(2), full.band_f32(2));
            x.iter().zip(&y).map(|(a, b)| (a - b).abs() as f64).sum::<f64>() / x.len() as f64
        };
        println!(
            "{name:>12}: mean |error| in Green {:.4} (bilinear upsampling alone {:.4})",
            err(&sharp),
            err(&naive)
        );
    }
    Ok(())
}
