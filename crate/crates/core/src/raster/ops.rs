use super::image::check_unique;
use super::{BandName, BinaryMask, MultispectralRaster, RasterData};
use crate::error::{Error, Result};

/// Default percentile stretch bounds.
pub const DEFAULT_LOW_PCT: f64 = 0.01;
pub const DEFAULT_HIGH_PCT: f64 = 0.99;

#[derive(Clone, Debug)]
pub struct Normalized {
    pub raster: MultispectralRaster,
    /// Bands whose low and high percentiles coincided; these were mapped to zero.
    pub degenerate_bands: Vec<BandName>,
}

/// Percentile of a sorted slice with linear interpolation between ranks.
pub fn percentile_sorted(sorted: &[f32], q: f64) -> f32 {
    if sorted.is_empty() {
        return f32::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    (sorted[lo] as f64 + (sorted[hi] as f64 - sorted[lo] as f64) * frac) as f32
}

/// Per-band linear stretch mapping the `low_pct` percentile to 0 and the
/// `high_pct` percentile to 1, clipped to [0, 1].
pub fn normalize(r: &MultispectralRaster, low_pct: f64, high_pct: f64) -> Result<Normalized> {
    if !(0.0..1.0).contains(&low_pct) || !(high_pct > low_pct && high_pct <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "percentiles must satisfy 0 <= low < high <= 1, got ({low_pct}, {high_pct})"
        )));
    }
    let mut planes = Vec::with_capacity(r.band_count());
    let mut degenerate_bands = Vec::new();
    for (i, band) in r.bands().iter().enumerate() {
        let values = r.band_f32(i);
        let mut sorted: Vec<f32> = values.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_unstable_by(|a, b| a.total_cmp(b));
        let lo = percentile_sorted(&sorted, low_pct);
        let hi = percentile_sorted(&sorted, high_pct);
        let span = hi - lo;
        if !(span > 0.0) || !span.is_finite() {
            log::warn!("band {band} is degenerate (percentiles {lo} and {hi}); mapping to zero");
            degenerate_bands.push(band.clone());
            planes.push(vec![0.0; values.len()]);
            continue;
        }
        let inv = 1.0 / span;
        planes.push(
            values
                .iter()
                .map(|&v| if v.is_finite() { ((v - lo) * inv).clamp(0.0, 1.0) } else { 0.0 })
                .collect(),
        );
    }
    let mut raster =
        MultispectralRaster::from_f32_planes(r.width(), r.height(), r.bands().to_vec(), planes)?;
    raster.set_ground_resolution(r.ground_resolution());
    Ok(Normalized {
        raster,
        degenerate_bands,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ResampleMethod {
    Nearest,
    #[default]
    Bilinear,
}

fn nearest_index(dst: usize, src_len: usize, dst_len: usize) -> usize {
    // Pixel-center alignment; for integer upscale factors this replicates
    // each source pixel into a factor x factor block.
    (((2 * dst + 1) * src_len) / (2 * dst_len)).min(src_len - 1)
}

fn nearest_plane<T: Copy>(src: &[T], sw: usize, sh: usize, tw: usize, th: usize) -> Vec<T> {
    let xs: Vec<usize> = (0..tw).map(|x| nearest_index(x, sw, tw)).collect();
    let mut out = Vec::with_capacity(tw * th);
    for y in 0..th {
        let row = &src[nearest_index(y, sh, th) * sw..][..sw];
        out.extend(xs.iter().map(|&x| row[x]));
    }
    out
}

fn bilinear_taps(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f32) {
    let pos = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).max(0.0);
    let i0 = (pos.floor() as usize).min(src_len - 1);
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, (pos - i0 as f64).min(1.0) as f32)
}

/// Bilinear resampling of one f32 plane with pixel-center alignment and
/// edge clamping.
pub fn bilinear_plane(src: &[f32], sw: usize, sh: usize, tw: usize, th: usize) -> Vec<f32> {
    let xs: Vec<_> = (0..tw).map(|x| bilinear_taps(x, sw, tw)).collect();
    let mut out = Vec::with_capacity(tw * th);
    for y in 0..th {
        let (y0, y1, fy) = bilinear_taps(y, sh, th);
        let r0 = &src[y0 * sw..][..sw];
        let r1 = &src[y1 * sw..][..sw];
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    out
}

/// Resamples every band independently. Nearest keeps the dtype; bilinear
/// promotes to f32.
pub fn resample(
    r: &MultispectralRaster,
    target_w: usize,
    target_h: usize,
    method: ResampleMethod,
) -> Result<MultispectralRaster> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::InvalidArgument("target dimensions must be at least 1".into()));
    }
    let (sw, sh) = (r.width(), r.height());
    let n = r.pixel_count();
    let bands = r.bands().to_vec();
    let mut out = match method {
        ResampleMethod::Nearest => {
            fn planes<T: Copy>(v: &[T], b: usize, n: usize, f: impl Fn(&[T]) -> Vec<T>) -> Vec<T> {
                (0..b).flat_map(|i| f(&v[i * n..(i + 1) * n])).collect()
            }
            let b = bands.len();
            let data = match r.data() {
                RasterData::U8(v) => {
                    RasterData::U8(planes(v, b, n, |p| nearest_plane(p, sw, sh, target_w, target_h)))
                }
                RasterData::U16(v) => {
                    RasterData::U16(planes(v, b, n, |p| nearest_plane(p, sw, sh, target_w, target_h)))
                }
                RasterData::F32(v) => {
                    RasterData::F32(planes(v, b, n, |p| nearest_plane(p, sw, sh, target_w, target_h)))
                }
            };
            MultispectralRaster::new(target_w, target_h, bands, r.bit_depth(), data)?
        }
        ResampleMethod::Bilinear => {
            let planes = (0..r.band_count())
                .map(|i| bilinear_plane(&r.band_f32(i), sw, sh, target_w, target_h))
                .collect();
            MultispectralRaster::from_f32_planes(target_w, target_h, bands, planes)?
        }
    };
    if let Some(res) = r.ground_resolution() {
        out.set_ground_resolution(Some(res * sw as f64 / target_w as f64));
    }
    Ok(out)
}

/// Nearest-neighbour resampling for masks; labels are never interpolated.
pub fn resample_mask(m: &BinaryMask, target_w: usize, target_h: usize) -> Result<BinaryMask> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::InvalidArgument("target dimensions must be at least 1".into()));
    }
    let data = nearest_plane(m.data(), m.width(), m.height(), target_w, target_h);
    BinaryMask::new(target_w, target_h, data)
}

/// Concatenates rasters along the band axis, preserving each part's band order.
pub fn stack(parts: &[MultispectralRaster]) -> Result<MultispectralRaster> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to stack".into()))?;
    let (w, h, dtype) = (first.width(), first.height(), first.dtype());
    for p in &parts[1..] {
        if p.width() != w || p.height() != h {
            return Err(Error::ShapeMismatch(format!(
                "cannot stack {}x{} with {w}x{h}",
                p.width(),
                p.height()
            )));
        }
        if p.dtype() != dtype {
            return Err(Error::ShapeMismatch(format!(
                "cannot stack {} with {}",
                p.dtype().name(),
                dtype.name()
            )));
        }
    }
    let bands: Vec<BandName> = parts.iter().flat_map(|p| p.bands().iter().cloned()).collect();
    check_unique(&bands)?;
    let bit_depth = parts.iter().map(|p| p.bit_depth()).max().unwrap_or(8);
    let data = match dtype {
        super::Dtype::U8 => RasterData::U8(
            parts
                .iter()
                .flat_map(|p| match p.data() {
                    RasterData::U8(v) => v.iter().copied(),
                    _ => unreachable!(),
                })
                .collect(),
        ),
        super::Dtype::U16 => RasterData::U16(
            parts
                .iter()
                .flat_map(|p| match p.data() {
                    RasterData::U16(v) => v.iter().copied(),
                    _ => unreachable!(),
                })
                .collect(),
        ),
        super::Dtype::F32 => RasterData::F32(
            parts
                .iter()
                .flat_map(|p| match p.data() {
                    RasterData::F32(v) => v.iter().copied(),
                    _ => unreachable!(),
                })
                .collect(),
        ),
    };
    let mut out = MultispectralRaster::new(w, h, bands, bit_depth, data)?;
    out.set_ground_resolution(first.ground_resolution());
    Ok(out)
}
