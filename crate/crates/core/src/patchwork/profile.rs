//! Prediction loss as a function of distance from the patch center.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PatchGeometry, PatchPredictor, PatchSampler, PlanarImage};
use crate::error::{Error, Result};
use crate::neuralnet::loss::bce_terms;
use crate::raster::BinaryMask;

/// Chebyshev ring of pixel `(r, c)` in an `n x n` patch; ring 0 is the
/// center (one pixel for odd `n`, four for even `n`).
pub fn chebyshev_bin(r: usize, c: usize, n: usize) -> usize {
    let last = n as isize - 1;
    let dr = (2 * r as isize - last).unsigned_abs();
    let dc = (2 * c as isize - last).unsigned_abs();
    dr.max(dc) / 2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    pub bin: usize,
    pub pixel_count: u64,
    pub mean_bce: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryProfile {
    pub bins: Vec<ProfileBin>,
    pub patches: usize,
}

impl BoundaryProfile {
    /// Spearman rank correlation between ring index and mean loss; positive
    /// when the loss grows toward the patch edge. `None` for fewer than two
    /// populated rings or a constant profile.
    pub fn trend(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .bins
            .iter()
            .filter(|b| b.pixel_count > 0)
            .map(|b| (b.bin as f64, b.mean_bce))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        spearman(&x, &y)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for b in &self.bins {
            wr.serialize(b)?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<ProfileBin>> {
        let mut rd = csv::Reader::from_reader(r);
        rd.deserialize().map(|row| row.map_err(Error::from)).collect()
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

/// Averages per-pixel cross-entropy over `n_patches` random, unaugmented
/// `input_size` windows, binned by Chebyshev distance from the window
/// center. The model must not crop its output.
pub fn boundary_profile(
    model: &dyn PatchPredictor,
    sources: Vec<(&PlanarImage, &BinaryMask)>,
    input_size: usize,
    n_patches: usize,
    seed: u64,
    batch_size: usize,
) -> Result<BoundaryProfile> {
    if model.output_crop() != 0 {
        return Err(Error::InvalidArgument(
            "boundary profiling needs a model without output crop".into(),
        ));
    }
    if input_size < 4 || input_size % 2 != 0 {
        return Err(Error::InvalidArgument(format!("profile window {input_size} must be even and >= 4")));
    }
    let geom = PatchGeometry::new(input_size, input_size - 2)?;
    let sampler = PatchSampler::new(sources, geom, seed)?
        .with_augmentation(false)
        .with_full_targets();
    let n = input_size;
    let bin_of: Vec<usize> = (0..n * n).map(|i| chebyshev_bin(i / n, i % n, n)).collect();
    let nbins = n / 2;
    let mut sums = vec![0.0f64; nbins];
    let mut counts = vec![0u64; nbins];
    let step = batch_size.max(1);
    let mut done = 0;
    while done < n_patches {
        let take = step.min(n_patches - done);
        let batch = sampler.batch(done as u64, take);
        let pred = model.predict_batch(&batch.inputs)?;
        if pred.shape() != batch.targets.shape() {
            return Err(Error::ShapeMismatch(format!(
                "model returned {:?} for targets {:?}",
                pred.shape(),
                batch.targets.shape()
            )));
        }
        for i in 0..take {
            let terms = bce_terms(batch.targets.sample(i), pred.sample(i));
            for (p, v) in terms.into_iter().enumerate() {
                sums[bin_of[p]] += v;
                counts[bin_of[p]] += 1;
            }
        }
        done += take;
    }
    Ok(BoundaryProfile {
        bins: (0..nbins)
            .map(|b| ProfileBin {
                bin: b,
                pixel_count: counts[b],
                mean_bce: if counts[b] > 0 { sums[b] / counts[b] as f64 } else { 0.0 },
            })
            .collect(),
        patches: n_patches,
    })
}
