//! Model checkpoints: magic `MSMODEL\n`, a little-endian `u64` header
//! length, a JSON header (configuration, free-form metadata and a
//! parameter manifest with byte offsets) and a raw little-endian `f32`
//! payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamKind, UNetConfig, UNetModel};
use crate::error::{Error, Result};
use crate::raster::msr::{read_container, write_container, FORMAT_VERSION};

pub const MODEL_MAGIC: &[u8; 8] = b"MSMODEL\n";

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    kind: ParamKind,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u64,
    config: UNetConfig,
    #[serde(default)]
    metadata: serde_json::Value,
    parameters: Vec<Entry>,
}

/// A loaded model plus whatever metadata was stored alongside it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: UNetModel<f32>,
    pub metadata: serde_json::Value,
}

pub fn encode_model(model: &UNetModel<f32>, metadata: &serde_json::Value) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    let mut parameters = Vec::with_capacity(model.params().len());
    for p in model.params() {
        parameters.push(Entry {
            name: p.name.clone(),
            kind: p.kind,
            shape: p.shape.clone(),
            offset: payload.len() as u64,
        });
        for v in &p.value {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = Header {
        version: FORMAT_VERSION,
        config: model.config().clone(),
        metadata: metadata.clone(),
        parameters,
    };
    Ok(write_container(MODEL_MAGIC, &serde_json::to_vec(&header)?, &payload))
}

pub fn decode_model(bytes: &[u8]) -> Result<Checkpoint> {
    let (header, payload) = read_container(MODEL_MAGIC, bytes)?;
    let header: Header =
        serde_json::from_slice(header).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(header.version));
    }
    let mut model = UNetModel::<f32>::zeroed(header.config)?;
    if header.parameters.len() != model.params().len() {
        return Err(Error::MalformedHeader(format!(
            "{} parameter tensors, architecture has {}",
            header.parameters.len(),
            model.params().len()
        )));
    }
    let mut expected_len = 0u64;
    let mut values = Vec::with_capacity(header.parameters.len());
    for (entry, p) in header.parameters.iter().zip(model.params()) {
        if entry.name != p.name || entry.shape != p.shape || entry.kind != p.kind {
            return Err(Error::MalformedHeader(format!(
                "parameter `{}` does not match the architecture (expected `{}` {:?})",
                entry.name, p.name, p.shape
            )));
        }
        let len = p.value.len() as u64 * 4;
        let start = entry.offset;
        let end = start + len;
        if end > payload.len() as u64 {
            return Err(Error::LengthMismatch {
                expected: end,
                actual: payload.len() as u64,
            });
        }
        expected_len = expected_len.max(end);
        let v: Vec<f32> = payload[start as usize..end as usize]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        values.push(v);
    }
    if expected_len != payload.len() as u64 {
        return Err(Error::LengthMismatch {
            expected: expected_len,
            actual: payload.len() as u64,
        });
    }
    model.load_values(values)?;
    Ok(Checkpoint {
        model,
        metadata: header.metadata,
    })
}

pub fn save_model(model: &UNetModel<f32>, metadata: &serde_json::Value, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model, metadata)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> UNetModel<f32> {
        let cfg = UNetConfig {
            in_channels: 3,
            base_channels: 2,
            depth: 2,
            output_crop: 1,
            ..Default::default()
        };
        UNetModel::new(cfg, 9).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let meta = serde_json::json!({"bands": ["Red", "NIR1"]});
        let bytes = encode_model(&m, &meta).unwrap();
        assert_eq!(&bytes[..8], MODEL_MAGIC);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back.model.params(), m.params());
        assert_eq!(back.model.config(), m.config());
        assert_eq!(back.metadata, meta);
        assert_eq!(encode_model(&back.model, &back.metadata).unwrap(), bytes);
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = encode_model(&model(), &serde_json::Value::Null).unwrap();
        assert!(matches!(
            decode_model(&bytes[..bytes.len() - 4]),
            Err(Error::LengthMismatch { .. })
        ));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(decode_model(&longer), Err(Error::LengthMismatch { .. })));
        assert!(matches!(decode_model(b"MSRASTER\n"), Err(Error::MalformedHeader(_))));
    }
}
