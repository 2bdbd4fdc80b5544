//! Tiles an image that is not a multiple of the output size, runs an
//! identity "model" over reflect-padded tiles and stitches the result back.

use msseg::patchwork::{predict_tiled, seam_report, tile_plan, IdentityModel, PatchGeometry, PlanarImage};

fn main() -> msseg::Result<()> {
    let (w, h) = (200, 130);
    let plane: Vec<f32> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f32, (i / w) as f32);
            (x * 0.05).sin() * (y * 0.07).cos()
        })
        .collect();
    let image = PlanarImage::new(w, h, vec![plane.clone()])?;
    let geom = PatchGeometry::default();
    let plan = tile_plan(w, h, &geom)?;
    println!("{} tiles for {w}x{h} with {}-pixel outputs", plan.len(), geom.output_size);
    for t in plan.iter().filter(|t| t.keep_x > 0 || t.keep_y > 0) {
        println!("  tile {} shifted: keeps {}x{} from offset ({}, {})", t.index, t.keep_w, t.keep_h, t.keep_x, t.keep_y);
    }

    let out = predict_tiled(&image, &geom, &IdentityModel { crop: geom.margin() }, 8)?;
    let exact = out.iter().zip(&plane).all(|(a, b)| a == b);
    println!("identity model reconstructs the image exactly: {exact}");
    let seams = seam_report(&out, &plan);
    println!(
        "largest jump across tile borders {:.4}, interior 99th percentile {:.4}",
        seams.seam_max, seams.interior_p99
    );
    Ok(())
}
