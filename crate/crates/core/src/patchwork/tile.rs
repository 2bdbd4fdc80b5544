//! Tiled prediction: exact-cover tile plans, stitching and seam analysis.

use ndarray::Array2;
use serde::Serialize;

use super::{PatchGeometry, PlanarImage};
use crate::error::{Error, Result};
use crate::neuralnet::{Tensor4, UNetModel};

/// One tile of a plan. The output window covers
/// `out_x .. out_x + output_size` (same for y) in image coordinates; only
/// the keep region, which starts `keep_x`/`keep_y` pixels into the output
/// window, is written when stitching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Tile {
    pub index: usize,
    pub out_x: usize,
    pub out_y: usize,
    pub keep_x: usize,
    pub keep_y: usize,
    pub keep_w: usize,
    pub keep_h: usize,
}

impl Tile {
    /// Top-left of the input window in the coordinates of the image padded
    /// by the geometry margin.
    pub fn input_origin(&self) -> (usize, usize) {
        (self.out_x, self.out_y)
    }
}

/// Window starts along one axis and the keep span of each.
fn axis_plan(n: usize, out: usize) -> Vec<(usize, usize, usize)> {
    let count = n.div_ceil(out);
    (0..count)
        .map(|i| {
            let nominal = i * out;
            let start = nominal.min(n - out);
            (start, nominal - start, (n - nominal).min(out))
        })
        .collect()
}

/// Lays output windows on a stride-`output_size` grid. When a dimension is
/// not a multiple of the output size the last row/column is shifted inward
/// to end at the image edge, and keeps only the strip not already covered.
pub fn tile_plan(width: usize, height: usize, geom: &PatchGeometry) -> Result<Vec<Tile>> {
    geom.validate()?;
    let out = geom.output_size;
    if width < out || height < out {
        return Err(Error::ImageTooSmall {
            width,
            height,
            required: out,
        });
    }
    let xs = axis_plan(width, out);
    let ys = axis_plan(height, out);
    let mut tiles = Vec::with_capacity(xs.len() * ys.len());
    for &(out_y, keep_y, keep_h) in &ys {
        for &(out_x, keep_x, keep_w) in &xs {
            tiles.push(Tile {
                index: tiles.len(),
                out_x,
                out_y,
                keep_x,
                keep_y,
                keep_w,
                keep_h,
            });
        }
    }
    Ok(tiles)
}

/// Assembles tile outputs (`output_size x output_size`, row-major) into a
/// `width x height` array. Tiles are applied in index order; a pixel
/// written twice must receive the same value.
pub fn stitch<T: Copy + PartialEq + Default>(
    width: usize,
    height: usize,
    output_size: usize,
    tiles: &[(Tile, Vec<T>)],
) -> Result<Array2<T>> {
    let mut order: Vec<&(Tile, Vec<T>)> = tiles.iter().collect();
    order.sort_by_key(|(t, _)| t.index);
    let mut out = Array2::from_elem((height, width), T::default());
    let mut written = Array2::from_elem((height, width), false);
    for (tile, values) in order {
        if values.len() != output_size * output_size {
            return Err(Error::ShapeMismatch(format!(
                "tile {} holds {} values, expected {}",
                tile.index,
                values.len(),
                output_size * output_size
            )));
        }
        for r in tile.keep_y..tile.keep_y + tile.keep_h {
            for c in tile.keep_x..tile.keep_x + tile.keep_w {
                let (y, x) = (tile.out_y + r, tile.out_x + c);
                if y >= height || x >= width {
                    return Err(Error::ShapeMismatch(format!("tile {} reaches outside the image", tile.index)));
                }
                let v = values[r * output_size + c];
                if written[(y, x)] {
                    if out[(y, x)] != v {
                        return Err(Error::CoverageOverlapConflict { x, y });
                    }
                } else {
                    out[(y, x)] = v;
                    written[(y, x)] = true;
                }
            }
        }
    }
    let missing = written.iter().filter(|w| !**w).count();
    if missing > 0 {
        let pos = written.indexed_iter().find(|(_, w)| !**w).map(|(p, _)| p).expect("counted");
        return Err(Error::CoverageGap {
            missing,
            x: pos.1,
            y: pos.0,
        });
    }
    Ok(out)
}

/// Something that maps input patches to single-channel output patches,
/// shrinking each side by [`output_crop`](Self::output_crop) pixels.
pub trait PatchPredictor: Sync {
    fn output_crop(&self) -> usize;
    fn predict_batch(&self, inputs: &Tensor4<f32>) -> Result<Tensor4<f32>>;
}

impl PatchPredictor for UNetModel<f32> {
    fn output_crop(&self) -> usize {
        self.config().output_crop
    }

    fn predict_batch(&self, inputs: &Tensor4<f32>) -> Result<Tensor4<f32>> {
        self.forward_inference(inputs)
    }
}

/// A U-Net with its output crop disabled.
pub struct Uncropped<'a>(pub &'a UNetModel<f32>);

impl PatchPredictor for Uncropped<'_> {
    fn output_crop(&self) -> usize {
        0
    }

    fn predict_batch(&self, inputs: &Tensor4<f32>) -> Result<Tensor4<f32>> {
        self.0.forward_uncropped(inputs)
    }
}

/// Returns the center of the first input channel.
pub struct IdentityModel {
    pub crop: usize,
}

impl PatchPredictor for IdentityModel {
    fn output_crop(&self) -> usize {
        self.crop
    }

    fn predict_batch(&self, inputs: &Tensor4<f32>) -> Result<Tensor4<f32>> {
        let mut first = Tensor4::zeros(inputs.n, 1, inputs.h, inputs.w);
        for i in 0..inputs.n {
            let plane_len = inputs.plane_len();
            first.data[i * plane_len..(i + 1) * plane_len].copy_from_slice(inputs.plane(i, 0));
        }
        Ok(first.center_crop(self.crop))
    }
}

/// Predicts the same value everywhere.
pub struct ConstantModel {
    pub value: f32,
    pub crop: usize,
}

impl PatchPredictor for ConstantModel {
    fn output_crop(&self) -> usize {
        self.crop
    }

    fn predict_batch(&self, inputs: &Tensor4<f32>) -> Result<Tensor4<f32>> {
        let c = self.crop;
        Ok(Tensor4::filled(inputs.n, 1, inputs.h - 2 * c, inputs.w - 2 * c, self.value))
    }
}

/// Reflect-pads `image`, predicts every tile of the plan in batches and
/// stitches the outputs into a `width x height` map.
pub fn predict_tiled(
    image: &PlanarImage,
    geom: &PatchGeometry,
    model: &dyn PatchPredictor,
    batch_size: usize,
) -> Result<Array2<f32>> {
    geom.validate()?;
    if model.output_crop() != geom.margin() {
        return Err(Error::InvalidArgument(format!(
            "model crops {} pixels but the patch margin is {}",
            model.output_crop(),
            geom.margin()
        )));
    }
    let plan = tile_plan(image.width, image.height, geom)?;
    let padded = image.pad(geom.margin())?;
    let (n_in, n_out, c) = (geom.input_size, geom.output_size, image.channels());
    let mut outputs = Vec::with_capacity(plan.len());
    for chunk in plan.chunks(batch_size.max(1)) {
        let mut batch = Tensor4::zeros(chunk.len(), c, n_in, n_in);
        for (tile, dst) in chunk.iter().zip(batch.data.chunks_exact_mut(c * n_in * n_in)) {
            let (x, y) = tile.input_origin();
            padded.copy_window(x, y, n_in, dst);
        }
        let pred = model.predict_batch(&batch)?;
        if pred.shape() != [chunk.len(), 1, n_out, n_out] {
            return Err(Error::ShapeMismatch(format!(
                "model returned {:?}, expected {:?}",
                pred.shape(),
                [chunk.len(), 1, n_out, n_out]
            )));
        }
        for (i, tile) in chunk.iter().enumerate() {
            outputs.push((*tile, pred.sample(i).to_vec()));
        }
    }
    stitch(image.width, image.height, n_out, &outputs)
}

/// Compares value jumps across tile borders with ordinary neighbour
/// differences inside tiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeamReport {
    /// Largest absolute difference between horizontally or vertically
    /// adjacent pixels that belong to different tiles.
    pub seam_max: f64,
    /// 99th percentile of absolute neighbour differences within tiles.
    pub interior_p99: f64,
    pub seam_pairs: usize,
    pub interior_pairs: usize,
}

impl SeamReport {
    /// A visible seam: the tile borders jump more than nearly all interior
    /// neighbour pairs.
    pub fn has_artifact(&self) -> bool {
        self.seam_max > self.interior_p99
    }
}

pub fn seam_report(map: &Array2<f32>, plan: &[Tile]) -> SeamReport {
    let (h, w) = map.dim();
    let mut owner = Array2::from_elem((h, w), usize::MAX);
    for t in plan {
        for y in t.out_y + t.keep_y..(t.out_y + t.keep_y + t.keep_h).min(h) {
            for x in t.out_x + t.keep_x..(t.out_x + t.keep_x + t.keep_w).min(w) {
                owner[(y, x)] = t.index;
            }
        }
    }
    let mut seam_max = 0.0f64;
    let mut seam_pairs = 0;
    let mut interior = Vec::new();
    let mut visit = |a: (usize, usize), b: (usize, usize)| {
        let d = (map[a] as f64 - map[b] as f64).abs();
        if owner[a] == owner[b] {
            interior.push(d);
        } else {
            seam_pairs += 1;
            seam_max = seam_max.max(d);
        }
    };
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                visit((y, x), (y, x + 1));
            }
            if y + 1 < h {
                visit((y, x), (y + 1, x));
            }
        }
    }
    interior.sort_by(f64::total_cmp);
    let interior_p99 = if interior.is_empty() {
        0.0
    } else {
        let sorted: Vec<f32> = interior.iter().map(|&v| v as f32).collect();
        crate::raster::percentile_sorted(&sorted, 0.99) as f64
    };
    SeamReport {
        seam_max,
        interior_p99,
        seam_pairs,
        interior_pairs: interior.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_multiple_has_no_shifts() {
        let plan = tile_plan(3600, 3600, &PatchGeometry::default()).unwrap();
        assert_eq!(plan.len(), 45 * 45);
        assert!(plan.iter().all(|t| t.keep_x == 0 && t.keep_y == 0 && t.keep_w == 80 && t.keep_h == 80));
    }

    #[test]
    fn last_tiles_shift_inward() {
        let plan = tile_plan(100, 100, &PatchGeometry::default()).unwrap();
        assert_eq!(plan.len(), 4);
        let last = plan[3];
        assert_eq!((last.out_x, last.out_y), (20, 20));
        assert_eq!((last.keep_x, last.keep_w), (60, 20));
        assert_eq!(tile_plan(80, 80, &PatchGeometry::default()).unwrap().len(), 1);
    }

    #[test]
    fn stitch_detects_gaps_and_conflicts() {
        let geom = PatchGeometry::new(8, 4).unwrap();
        let plan = tile_plan(8, 4, &geom).unwrap();
        let tiles: Vec<(Tile, Vec<u8>)> = plan.iter().map(|t| (*t, vec![1; 16])).collect();
        assert!(stitch(8, 4, 4, &tiles).is_ok());
        assert!(matches!(
            stitch(8, 4, 4, &tiles[..1]),
            Err(Error::CoverageGap { missing: 16, x: 4, y: 0 })
        ));
        let mut dup = tiles.clone();
        dup.push((plan[0], vec![2; 16]));
        assert!(matches!(stitch(8, 4, 4, &dup), Err(Error::CoverageOverlapConflict { .. })));
    }

    #[test]
    fn constant_tiles_have_no_seams() {
        let geom = PatchGeometry::new(12, 8).unwrap();
        let img = PlanarImage::new(20, 20, vec![vec![0.25; 400]]).unwrap();
        let map = predict_tiled(&img, &geom, &ConstantModel { value: 0.7, crop: 2 }, 3).unwrap();
        assert!(map.iter().all(|&v| v == 0.7));
        let report = seam_report(&map, &tile_plan(20, 20, &geom).unwrap());
        assert_eq!(report.seam_max, 0.0);
        assert!(report.seam_pairs > 0);
    }
}
