//! Segments waterways and standing water on a synthetic scene with the
//! CCCI/NDWI rule and the area split, then scores it against the truth.

use msseg::indices::{ndwi, segment_water, WaterConfig};
use msseg::neuralnet::jaccard;
use msseg::pipeline::generate_scene;
use msseg::raster::ClassLabel;

fn main() -> msseg::Result<()> {
    let scene = generate_scene(7, 0, 512, 1.0)?;
    let reflectance = scene.image.to_reflectance();

    let index = ndwi(&reflectance)?;
    let positive = index.defined().filter(|&v| v > 0.0).count();
    println!("NDWI > 0 on {positive} of {} pixels", index.values.len());

    let seg = segment_water(&reflectance, &WaterConfig::default())?;
    println!("{} connected water bodies", seg.components.len());
    for (class, pred) in [(ClassLabel::Waterway, &seg.waterway), (ClassLabel::StandingWater, &seg.standing)] {
        let truth = scene.mask.binary(class)?;
        println!("{class:>14}: jaccard {:.4} ({} px predicted)", jaccard(pred, &truth)?, pred.count());
    }
    Ok(())
}
