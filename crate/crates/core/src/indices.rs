//! Reflectance indices and unsupervised water segmentation.
//!
//! Indices are ratios of homogeneous degree zero, so they can be computed on
//! raw digital numbers or on uniformly scaled reflectance alike. They must
//! not be computed on per-band stretched data, which changes band ratios.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BandName, BinaryMask, MultispectralRaster};

/// Denominator guard.
pub const INDEX_EPSILON: f32 = 1e-6;

/// Value stored for pixels where an index is undefined.
pub const UNDEFINED: f32 = f32::NAN;

/// Per-pixel index values; undefined pixels hold [`UNDEFINED`].
#[derive(Clone, Debug)]
pub struct IndexMap {
    pub width: usize,
    pub height: usize,
    pub name: String,
    pub values: Vec<f32>,
}

impl IndexMap {
    pub fn defined(&self) -> impl Iterator<Item = f32> + '_ {
        self.values.iter().copied().filter(|v| !v.is_nan())
    }

    pub fn defined_count(&self) -> usize {
        self.defined().count()
    }

    /// Single-band f32 raster named `index:<name>`.
    pub fn to_raster(&self) -> Result<MultispectralRaster> {
        MultispectralRaster::from_f32_planes(
            self.width,
            self.height,
            vec![BandName::index(self.name.clone())],
            vec![self.values.clone()],
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Ccci,
    Ndwi,
    Ndvi,
}

impl IndexKind {
    pub fn name(self) -> &'static str {
        match self {
            IndexKind::Ccci => "ccci",
            IndexKind::Ndwi => "ndwi",
            IndexKind::Ndvi => "ndvi",
        }
    }
}

impl std::str::FromStr for IndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ccci" => Ok(IndexKind::Ccci),
            "ndwi" => Ok(IndexKind::Ndwi),
            "ndvi" => Ok(IndexKind::Ndvi),
            _ => Err(Error::InvalidArgument(format!("unknown index `{s}`"))),
        }
    }
}

/// Which near-infrared band feeds the indices. Defaults to NIR1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexBands {
    pub nir: BandName,
}

impl Default for IndexBands {
    fn default() -> Self {
        Self { nir: BandName::Nir1 }
    }
}

// Evaluated in f64 so the only rounding is the final store.
fn normalized_difference(a: &[f32], b: &[f32]) -> Vec<f32> {
    a.iter()
        .zip(b)
        .map(|(&a, &b)| {
            let (a, b) = (a as f64, b as f64);
            let sum = a + b;
            if sum.abs() <= INDEX_EPSILON as f64 {
                UNDEFINED
            } else {
                ((a - b) / sum) as f32
            }
        })
        .collect()
}

pub fn compute(r: &MultispectralRaster, kind: IndexKind, bands: &IndexBands) -> Result<IndexMap> {
    let nir = r.band_by_name_f32(&bands.nir)?;
    let values = match kind {
        IndexKind::Ndwi => normalized_difference(&r.band_by_name_f32(&BandName::Green)?, &nir),
        IndexKind::Ndvi => normalized_difference(&nir, &r.band_by_name_f32(&BandName::Red)?),
        IndexKind::Ccci => {
            let red_edge = r.band_by_name_f32(&BandName::RedEdge)?;
            let red = r.band_by_name_f32(&BandName::Red)?;
            nir.iter()
                .zip(&red_edge)
                .zip(&red)
                .map(|((&n, &e), &r)| {
                    let (n, e, r) = (n as f64, e as f64, r as f64);
                    let edge_sum = n + e;
                    let red_diff = n - r;
                    let eps = INDEX_EPSILON as f64;
                    if edge_sum.abs() <= eps || red_diff.abs() <= eps {
                        UNDEFINED
                    } else {
                        ((n - e) / edge_sum * ((n + r) / red_diff)) as f32
                    }
                })
                .collect()
        }
    };
    Ok(IndexMap {
        width: r.width(),
        height: r.height(),
        name: kind.name().to_string(),
        values,
    })
}

/// Canopy chlorophyll content index:
/// `((NIR - RedEdge) / (NIR + RedEdge)) * ((NIR + Red) / (NIR - Red))`.
pub fn ccci(r: &MultispectralRaster) -> Result<IndexMap> {
    compute(r, IndexKind::Ccci, &IndexBands::default())
}

/// Normalized difference water index: `(Green - NIR) / (Green + NIR)`.
pub fn ndwi(r: &MultispectralRaster) -> Result<IndexMap> {
    compute(r, IndexKind::Ndwi, &IndexBands::default())
}

/// Normalized difference vegetation index: `(NIR - Red) / (NIR + Red)`.
pub fn ndvi(r: &MultispectralRaster) -> Result<IndexMap> {
    compute(r, IndexKind::Ndvi, &IndexBands::default())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// `value >= t`
    Above,
    /// `value <= t`
    Below,
}

/// Closed threshold; undefined pixels are always background.
pub fn threshold(m: &IndexMap, t: f32, polarity: Polarity) -> BinaryMask {
    let data = m
        .values
        .iter()
        .map(|&v| {
            let hit = match polarity {
                Polarity::Above => v >= t,
                Polarity::Below => v <= t,
            };
            hit as u8
        })
        .collect();
    BinaryMask::new(m.width, m.height, data).expect("shape preserved")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::InvalidArgument(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }

    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

/// Labelled connected components of a binary mask.
///
/// `labels` holds 0 for background and ids `1..=K` in raster-scan order of
/// each component's first pixel; `areas[k - 1]` is the pixel count of id `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentSet {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub areas: Vec<usize>,
}

impl ComponentSet {
    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn foreground(&self) -> usize {
        self.areas.iter().sum()
    }
}

pub fn connected_components(m: &BinaryMask, connectivity: Connectivity) -> ComponentSet {
    let (w, h) = (m.width(), m.height());
    let mut labels = vec![0u32; w * h];
    let mut areas = Vec::new();
    let mut queue = VecDeque::new();
    let src = m.data();
    for start in 0..w * h {
        if src[start] == 0 || labels[start] != 0 {
            continue;
        }
        let id = areas.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut area = 0;
        while let Some(p) = queue.pop_front() {
            area += 1;
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if src[q] != 0 && labels[q] == 0 {
                    labels[q] = id;
                    queue.push_back(q);
                }
            }
        }
        areas.push(area);
    }
    ComponentSet {
        width: w,
        height: h,
        labels,
        areas,
    }
}

/// Components with `area >= area_threshold` become waterway, the rest
/// standing water.
pub fn split_water_by_area(c: &ComponentSet, area_threshold: usize) -> Result<(BinaryMask, BinaryMask)> {
    if area_threshold == 0 {
        return Err(Error::InvalidArgument("area threshold must be positive".into()));
    }
    let mut waterway = BinaryMask::zeros(c.width, c.height);
    let mut standing = BinaryMask::zeros(c.width, c.height);
    for (p, &id) in c.labels.iter().enumerate() {
        if id == 0 {
            continue;
        }
        let (x, y) = (p % c.width, p / c.width);
        if c.areas[id as usize - 1] >= area_threshold {
            waterway.set(x, y, true);
        } else {
            standing.set(x, y, true);
        }
    }
    Ok((waterway, standing))
}

/// Settings for the index-based water segmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaterConfig {
    /// Pixels need `CCCI >= ccci_threshold`.
    pub ccci_threshold: f32,
    /// ... and `NDWI >= ndwi_threshold`.
    pub ndwi_threshold: f32,
    /// Bodies of at least this many pixels are waterways.
    pub area_threshold: usize,
    pub connectivity: Connectivity,
    pub nir: BandName,
}

impl Default for WaterConfig {
    fn default() -> Self {
        Self {
            ccci_threshold: 0.0,
            ndwi_threshold: 0.0,
            area_threshold: 5000,
            connectivity: Connectivity::Eight,
            nir: BandName::Nir1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WaterSegmentation {
    pub water: BinaryMask,
    pub components: ComponentSet,
    pub waterway: BinaryMask,
    pub standing: BinaryMask,
}

/// Thresholded CCCI gated by NDWI, followed by the area split.
pub fn segment_water(r: &MultispectralRaster, cfg: &WaterConfig) -> Result<WaterSegmentation> {
    let bands = IndexBands { nir: cfg.nir.clone() };
    let ccci = threshold(&compute(r, IndexKind::Ccci, &bands)?, cfg.ccci_threshold, Polarity::Above);
    let ndwi = threshold(&compute(r, IndexKind::Ndwi, &bands)?, cfg.ndwi_threshold, Polarity::Above);
    let data = ccci.data().iter().zip(ndwi.data()).map(|(a, b)| a & b).collect();
    let water = BinaryMask::new(r.width(), r.height(), data)?;
    let components = connected_components(&water, cfg.connectivity);
    let (waterway, standing) = split_water_by_area(&components, cfg.area_threshold)?;
    Ok(WaterSegmentation {
        water,
        components,
        waterway,
        standing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixel(values: &[(BandName, f32)]) -> MultispectralRaster {
        MultispectralRaster::from_f32_planes(
            1,
            1,
            values.iter().map(|(b, _)| b.clone()).collect(),
            values.iter().map(|(_, v)| vec![*v]).collect(),
        )
        .unwrap()
    }

    fn one(m: IndexMap) -> f32 {
        m.values[0]
    }

    #[test]
    fn ccci_examples() {
        let r = pixel(&[(BandName::Nir1, 0.8), (BandName::RedEdge, 0.4), (BandName::Red, 0.2)]);
        assert!((one(ccci(&r).unwrap()) - 5.0 / 9.0).abs() < 1e-6);

        let r = pixel(&[(BandName::Nir1, 0.5), (BandName::RedEdge, 0.5), (BandName::Red, 0.2)]);
        assert_eq!(one(ccci(&r).unwrap()), 0.0);

        let r = pixel(&[(BandName::Nir1, 0.5), (BandName::RedEdge, 0.3), (BandName::Red, 0.5)]);
        assert!(one(ccci(&r).unwrap()).is_nan());
    }

    #[test]
    fn ndwi_examples() {
        let r = pixel(&[(BandName::Green, 0.6), (BandName::Nir1, 0.2)]);
        assert!((one(ndwi(&r).unwrap()) - 0.5).abs() < 1e-6);
        let r = pixel(&[(BandName::Green, 0.3), (BandName::Nir1, 0.3)]);
        assert_eq!(one(ndwi(&r).unwrap()), 0.0);
        let r = pixel(&[(BandName::Green, 0.0), (BandName::Nir1, 0.0)]);
        assert!(one(ndwi(&r).unwrap()).is_nan());
    }

    #[test]
    fn ndvi_examples() {
        let r = pixel(&[(BandName::Red, 0.1), (BandName::Nir1, 0.9)]);
        assert!((one(ndvi(&r).unwrap()) - 0.8).abs() < 1e-6);
        let r = pixel(&[(BandName::Red, 0.4), (BandName::Nir1, 0.4)]);
        assert_eq!(one(ndvi(&r).unwrap()), 0.0);
        let r = pixel(&[(BandName::Red, 0.0), (BandName::Nir1, 0.0)]);
        assert!(one(ndvi(&r).unwrap()).is_nan());
    }

    #[test]
    fn nir_band_is_configurable() {
        let r = pixel(&[(BandName::Green, 0.6), (BandName::Nir1, 0.2), (BandName::Nir2, 0.6)]);
        let m = compute(&r, IndexKind::Ndwi, &IndexBands { nir: BandName::Nir2 }).unwrap();
        assert_eq!(m.values[0], 0.0);
    }

    #[test]
    fn missing_band() {
        let r = pixel(&[(BandName::Green, 0.6)]);
        assert!(matches!(ndwi(&r), Err(Error::MissingBand(BandName::Nir1))));
        assert!(matches!(ccci(&r), Err(Error::MissingBand(_))));
    }

    #[test]
    fn threshold_is_closed_and_skips_undefined() {
        let m = IndexMap {
            width: 4,
            height: 1,
            name: "t".into(),
            values: vec![-0.5, 0.25, 0.3, f32::NAN],
        };
        assert_eq!(threshold(&m, 0.25, Polarity::Above).data(), &[0, 1, 1, 0]);
        assert_eq!(threshold(&m, 0.25, Polarity::Below).data(), &[1, 1, 0, 0]);
        assert_eq!(threshold(&m, 1.0, Polarity::Above).count(), 0);
    }

    #[test]
    fn components_l_shape_and_diagonals() {
        let l = BinaryMask::new(3, 3, vec![1, 0, 0, 1, 1, 0, 0, 0, 0]).unwrap();
        let c = connected_components(&l, Connectivity::Four);
        assert_eq!(c.areas, vec![3]);

        let diag = BinaryMask::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        assert_eq!(connected_components(&diag, Connectivity::Four).len(), 2);
        assert_eq!(connected_components(&diag, Connectivity::Eight).len(), 1);

        assert!(connected_components(&BinaryMask::zeros(5, 5), Connectivity::Eight).is_empty());
    }

    #[test]
    fn area_split_extremes() {
        let m = BinaryMask::from_fn(10, 10, |x, y| (x < 3 && y < 3) || (x > 6 && y > 7));
        let c = connected_components(&m, Connectivity::Eight);
        let (ww, st) = split_water_by_area(&c, 1).unwrap();
        assert_eq!((ww.count(), st.count()), (15, 0));
        let (ww, st) = split_water_by_area(&c, 100).unwrap();
        assert_eq!((ww.count(), st.count()), (0, 15));
        assert!(split_water_by_area(&c, 0).is_err());
    }
}
