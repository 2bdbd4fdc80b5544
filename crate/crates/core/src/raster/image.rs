use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::BandName;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    U16,
    F32,
}

impl Dtype {
    pub fn size_of(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::F32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::U16 => "u16",
            Dtype::F32 => "f32",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "u8" => Ok(Dtype::U8),
            "u16" => Ok(Dtype::U16),
            "f32" => Ok(Dtype::F32),
            other => Err(Error::UnsupportedDtype(other.to_string())),
        }
    }

    /// Natural bit depth of the storage type.
    pub fn default_bit_depth(self) -> u8 {
        match self {
            Dtype::U8 => 8,
            Dtype::U16 => 16,
            Dtype::F32 => 32,
        }
    }
}

/// Planar pixel storage: band-major, row-major within a band.
#[derive(Clone, Debug)]
pub enum RasterData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl RasterData {
    pub fn dtype(&self) -> Dtype {
        match self {
            RasterData::U8(_) => Dtype::U8,
            RasterData::U16(_) => Dtype::U16,
            RasterData::F32(_) => Dtype::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RasterData::U8(v) => v.len(),
            RasterData::U16(v) => v.len(),
            RasterData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn slice_f32(&self, start: usize, len: usize) -> Vec<f32> {
        match self {
            RasterData::U8(v) => v[start..start + len].iter().map(|&x| x as f32).collect(),
            RasterData::U16(v) => v[start..start + len].iter().map(|&x| x as f32).collect(),
            RasterData::F32(v) => v[start..start + len].to_vec(),
        }
    }
}

impl PartialEq for RasterData {
    /// Bitwise equality; NaN payloads compare equal to themselves.
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (RasterData::U8(a), RasterData::U8(b)) => a == b,
            (RasterData::U16(a), RasterData::U16(b)) => a == b,
            (RasterData::F32(a), RasterData::F32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

/// A W x H x B multispectral image.
#[derive(Clone, Debug, PartialEq)]
pub struct MultispectralRaster {
    width: usize,
    height: usize,
    bands: Vec<BandName>,
    bit_depth: u8,
    ground_resolution: Option<f64>,
    data: RasterData,
}

impl MultispectralRaster {
    /// Builds a raster, checking the length, band-uniqueness and bit-depth
    /// invariants.
    pub fn new(
        width: usize,
        height: usize,
        bands: Vec<BandName>,
        bit_depth: u8,
        data: RasterData,
    ) -> Result<Self> {
        check_unique(&bands)?;
        let expected = width * height * bands.len();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height}x{} raster needs {expected} values, got {}",
                bands.len(),
                data.len()
            )));
        }
        let max_depth = data.dtype().default_bit_depth();
        if bit_depth == 0 || bit_depth > max_depth {
            return Err(Error::InvalidArgument(format!(
                "bit depth {bit_depth} invalid for {}",
                data.dtype().name()
            )));
        }
        if bit_depth < max_depth {
            let limit = 1u64 << bit_depth;
            let over = match &data {
                RasterData::U8(v) => v.iter().map(|&x| x as u64).find(|&x| x >= limit),
                RasterData::U16(v) => v.iter().map(|&x| x as u64).find(|&x| x >= limit),
                RasterData::F32(_) => None,
            };
            if let Some(value) = over {
                return Err(Error::ValueOutOfRange { value, bit_depth });
            }
        }
        Ok(Self {
            width,
            height,
            bands,
            bit_depth,
            ground_resolution: None,
            data,
        })
    }

    /// Builds an f32 raster from one plane per band.
    pub fn from_f32_planes(
        width: usize,
        height: usize,
        bands: Vec<BandName>,
        planes: Vec<Vec<f32>>,
    ) -> Result<Self> {
        if planes.len() != bands.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} planes for {} bands",
                planes.len(),
                bands.len()
            )));
        }
        let mut data = Vec::with_capacity(width * height * bands.len());
        for plane in &planes {
            if plane.len() != width * height {
                return Err(Error::ShapeMismatch(format!(
                    "plane of {} values for {width}x{height}",
                    plane.len()
                )));
            }
            data.extend_from_slice(plane);
        }
        Self::new(width, height, bands, 32, RasterData::F32(data))
    }

    pub fn with_ground_resolution(mut self, meters_per_pixel: f64) -> Self {
        self.ground_resolution = Some(meters_per_pixel);
        self
    }

    pub(crate) fn set_ground_resolution(&mut self, res: Option<f64>) {
        self.ground_resolution = res;
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> &[BandName] {
        &self.bands
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn ground_resolution(&self) -> Option<f64> {
        self.ground_resolution
    }

    pub fn data(&self) -> &RasterData {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn band_index(&self, name: &BandName) -> Option<usize> {
        self.bands.iter().position(|b| b == name)
    }

    /// Values of band `i` converted to f32.
    pub fn band_f32(&self, i: usize) -> Vec<f32> {
        let n = self.pixel_count();
        self.data.slice_f32(i * n, n)
    }

    pub fn band_by_name_f32(&self, name: &BandName) -> Result<Vec<f32>> {
        let i = self
            .band_index(name)
            .ok_or_else(|| Error::MissingBand(name.clone()))?;
        Ok(self.band_f32(i))
    }

    /// All bands as f32 planes.
    pub fn planes_f32(&self) -> Vec<Vec<f32>> {
        (0..self.band_count()).map(|i| self.band_f32(i)).collect()
    }

    /// Keeps only the named bands, in the requested order.
    pub fn select_bands(&self, names: &[BandName]) -> Result<Self> {
        let n = self.pixel_count();
        let idx: Vec<usize> = names
            .iter()
            .map(|b| self.band_index(b).ok_or_else(|| Error::MissingBand(b.clone())))
            .collect::<Result<_>>()?;
        let data = match &self.data {
            RasterData::U8(v) => RasterData::U8(gather(v, &idx, n)),
            RasterData::U16(v) => RasterData::U16(gather(v, &idx, n)),
            RasterData::F32(v) => RasterData::F32(gather(v, &idx, n)),
        };
        let mut out = Self::new(self.width, self.height, names.to_vec(), self.bit_depth, data)?;
        out.ground_resolution = self.ground_resolution;
        Ok(out)
    }

    /// Uniform scaling of integer data into [0, 1] by the full bit-depth
    /// range. Unlike [`normalize`](super::normalize) this keeps the ratios
    /// between bands intact, which is what reflectance indices need.
    pub fn to_reflectance(&self) -> Self {
        let scale = match self.dtype() {
            Dtype::F32 => 1.0,
            _ => 1.0 / (((1u64 << self.bit_depth) - 1) as f32),
        };
        let data: Vec<f32> = match &self.data {
            RasterData::U8(v) => v.iter().map(|&x| x as f32 * scale).collect(),
            RasterData::U16(v) => v.iter().map(|&x| x as f32 * scale).collect(),
            RasterData::F32(v) => v.clone(),
        };
        Self {
            width: self.width,
            height: self.height,
            bands: self.bands.clone(),
            bit_depth: 32,
            ground_resolution: self.ground_resolution,
            data: RasterData::F32(data),
        }
    }
}

fn gather<T: Copy>(src: &[T], idx: &[usize], n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(idx.len() * n);
    for &i in idx {
        out.extend_from_slice(&src[i * n..(i + 1) * n]);
    }
    out
}

pub(crate) fn check_unique(bands: &[BandName]) -> Result<()> {
    let mut seen = HashSet::new();
    for b in bands {
        if !seen.insert(b) {
            return Err(Error::DuplicateBandName(b.clone()));
        }
    }
    Ok(())
}
