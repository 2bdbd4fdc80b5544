//! The MSR raster container.
//!
//! Layout: the 9-byte magic `MSRASTER\n`, a little-endian `u64` header
//! length, a compact UTF-8 JSON header and a raw little-endian planar
//! payload (band-major, row-major within a band).
//!
//! ```text
//! {"version":1,"width":W,"height":H,"bands":[...],"dtype":"u16","bit_depth":11}
//! ```
//!
//! Label masks use the same container with dtype `u8` and band names
//! `class:<label>`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BandName, ClassLabel, Dtype, LabelMask, MultispectralRaster, RasterData};
use crate::error::{Error, Result};

pub const RASTER_MAGIC: &[u8; 9] = b"MSRASTER\n";
pub const FORMAT_VERSION: u64 = 1;
const CLASS_PREFIX: &str = "class:";

#[derive(Serialize, Deserialize)]
struct Header {
    version: u64,
    width: usize,
    height: usize,
    bands: Vec<String>,
    dtype: String,
    bit_depth: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_resolution: Option<f64>,
}

/// Serializes a container: magic, header length, header JSON, payload.
pub(crate) fn write_container(magic: &[u8], header_json: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(magic.len() + 8 + header_json.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(header_json);
    out.extend_from_slice(payload);
    out
}

/// Splits a container into (header JSON, payload) after checking the magic.
pub(crate) fn read_container<'a>(magic: &[u8], bytes: &'a [u8]) -> Result<(&'a [u8], &'a [u8])> {
    if bytes.len() < magic.len() || &bytes[..magic.len()] != magic {
        return Err(Error::MalformedHeader("bad magic bytes".into()));
    }
    let rest = &bytes[magic.len()..];
    if rest.len() < 8 {
        return Err(Error::MalformedHeader("truncated header length".into()));
    }
    let header_len = u64::from_le_bytes(rest[..8].try_into().expect("8 bytes"));
    let rest = &rest[8..];
    if header_len > rest.len() as u64 {
        return Err(Error::MalformedHeader(format!(
            "header length {header_len} exceeds file size"
        )));
    }
    let (header, payload) = rest.split_at(header_len as usize);
    Ok((header, payload))
}

fn encode_payload(data: &RasterData) -> Vec<u8> {
    match data {
        RasterData::U8(v) => v.clone(),
        RasterData::U16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        RasterData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
    }
}

fn decode_payload(dtype: Dtype, payload: &[u8]) -> RasterData {
    match dtype {
        Dtype::U8 => RasterData::U8(payload.to_vec()),
        Dtype::U16 => RasterData::U16(
            payload
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        Dtype::F32 => RasterData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
    }
}

fn encode(
    width: usize,
    height: usize,
    bands: Vec<String>,
    bit_depth: u8,
    ground_resolution: Option<f64>,
    data: &RasterData,
) -> Vec<u8> {
    let header = Header {
        version: FORMAT_VERSION,
        width,
        height,
        bands,
        dtype: data.dtype().name().to_string(),
        bit_depth,
        ground_resolution,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    write_container(RASTER_MAGIC, &json, &encode_payload(data))
}

fn decode(bytes: &[u8]) -> Result<(Header, Dtype, RasterData)> {
    let (header_json, payload) = read_container(RASTER_MAGIC, bytes)?;
    let header: Header = serde_json::from_slice(header_json)
        .map_err(|e| Error::MalformedHeader(e.to_string()))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(header.version));
    }
    let dtype = Dtype::parse(&header.dtype)?;
    let expected = (header.width as u64)
        .checked_mul(header.height as u64)
        .and_then(|n| n.checked_mul(header.bands.len() as u64))
        .and_then(|n| n.checked_mul(dtype.size_of() as u64))
        .ok_or_else(|| Error::MalformedHeader("declared size overflows".into()))?;
    if expected != payload.len() as u64 {
        return Err(Error::LengthMismatch {
            expected,
            actual: payload.len() as u64,
        });
    }
    let data = decode_payload(dtype, payload);
    Ok((header, dtype, data))
}

pub fn encode_raster(r: &MultispectralRaster) -> Vec<u8> {
    encode(
        r.width(),
        r.height(),
        r.bands().iter().map(|b| b.to_string()).collect(),
        r.bit_depth(),
        r.ground_resolution(),
        r.data(),
    )
}

pub fn decode_raster(bytes: &[u8]) -> Result<MultispectralRaster> {
    let (header, _, data) = decode(bytes)?;
    let bands = header
        .bands
        .iter()
        .map(|s| s.parse::<BandName>())
        .collect::<Result<Vec<_>>>()?;
    let mut r = MultispectralRaster::new(header.width, header.height, bands, header.bit_depth, data)
        .map_err(|e| match e {
            Error::ShapeMismatch(m) | Error::InvalidArgument(m) => Error::MalformedHeader(m),
            other => other,
        })?;
    r.set_ground_resolution(header.ground_resolution);
    Ok(r)
}

pub fn encode_mask(m: &LabelMask) -> Vec<u8> {
    encode(
        m.width(),
        m.height(),
        m.classes().iter().map(|c| format!("{CLASS_PREFIX}{c}")).collect(),
        8,
        None,
        &RasterData::U8(m.data().to_vec()),
    )
}

pub fn decode_mask(bytes: &[u8]) -> Result<LabelMask> {
    let (header, dtype, data) = decode(bytes)?;
    if dtype != Dtype::U8 {
        return Err(Error::UnsupportedDtype(format!(
            "{} (masks must be u8)",
            dtype.name()
        )));
    }
    let classes = header
        .bands
        .iter()
        .map(|s| {
            s.strip_prefix(CLASS_PREFIX)
                .ok_or_else(|| Error::MalformedHeader(format!("mask band `{s}` lacks `class:`")))
                .and_then(|c| c.parse::<ClassLabel>().map_err(|e| Error::MalformedHeader(e.to_string())))
        })
        .collect::<Result<Vec<_>>>()?;
    let RasterData::U8(data) = data else { unreachable!() };
    LabelMask::new(header.width, header.height, classes, data)
}

pub fn save_raster(r: &MultispectralRaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_raster(r)).map_err(|e| Error::io(path, e))
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<MultispectralRaster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raster(&bytes)
}

pub fn save_mask(m: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask(m)).map_err(|e| Error::io(path, e))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes)
}
