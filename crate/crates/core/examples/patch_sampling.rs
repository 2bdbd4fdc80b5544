//! Dihedral transforms and augmented patch sampling.

use msseg::patchwork::{sample_patches, Dih4, PatchGeometry};
use msseg::pipeline::generate_scene;
use msseg::raster::ClassLabel;
use ndarray::array;

fn main() -> msseg::Result<()> {
    let a = array![[1, 2], [3, 4]];
    for g in Dih4::ALL {
        println!("{g:?}: {:?}", g.apply(&a)?.into_raw_vec_and_offset().0);
    }
    println!("rot90 then flipH = {:?}", Dih4::Rot90.then(Dih4::FlipH));

    let scene = generate_scene(0, 0, 256, 1.0)?;
    let geom = PatchGeometry::new(64, 48)?;
    let batch = sample_patches(&scene.image, &scene.mask, ClassLabel::Buildings, geom, 8, 42)?;
    println!("inputs {:?}, targets {:?}", batch.inputs.shape(), batch.targets.shape());
    for (i, o) in batch.origins.iter().enumerate() {
        let frac = batch.targets.sample(i).iter().sum::<f32>() / (48.0 * 48.0);
        println!("  patch at ({:3}, {:3}) {:?}: {:.1}% buildings", o.x, o.y, o.transform, 100.0 * frac);
    }
    Ok(())
}
