//! Builds a small 11-bit raster, writes it as MSR, reads it back, then
//! stretches, resamples and stacks it.

use msseg::raster::{
    load_raster, normalize, resample, save_raster, stack, BandName, MultispectralRaster, RasterData, ResampleMethod,
};

fn main() -> msseg::Result<()> {
    let (w, h) = (8, 6);
    let bands = vec![BandName::Red, BandName::Nir1];
    let data: Vec<u16> = (0..w * h * 2).map(|i| ((i * 37) % 2048) as u16).collect();
    let image = MultispectralRaster::new(w, h, bands, 11, RasterData::U16(data))?;

    let path = std::env::temp_dir().join("msseg_raster_io.msr");
    save_raster(&image, &path)?;
    let back = load_raster(&path)?;
    assert_eq!(back, image);
    println!("round-tripped {}x{} raster with bands {:?}", back.width(), back.height(), back.bands());

    let stretched = normalize(&back, 0.01, 0.99)?;
    let red = stretched.raster.band_f32(0);
    println!("stretched red range: {:.3} .. {:.3}", red.iter().cloned().fold(f32::MAX, f32::min), red.iter().cloned().fold(f32::MIN, f32::max));

    let big = resample(&back, 16, 12, ResampleMethod::Bilinear)?;
    println!("bilinear upsample to {}x{}", big.width(), big.height());

    let pan = MultispectralRaster::from_f32_planes(w, h, vec![BandName::Pan], vec![vec![0.5; w * h]])?;
    let stacked = stack(&[back.to_reflectance(), pan])?;
    println!("stacked bands: {:?}", stacked.bands());
    Ok(())
}
