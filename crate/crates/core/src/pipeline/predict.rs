use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{prepare_features, FeatureConfig, RunConfig};
use crate::error::{Error, Result};
use crate::neuralnet::{load_model, UNetModel};
use crate::patchwork::{predict_tiled, PatchGeometry, PlanarImage};
use crate::raster::{BinaryMask, ClassLabel, MultispectralRaster};

/// Tiles predicted per forward pass.
pub const PREDICT_BATCH: usize = 16;

/// Everything besides the weights that prediction needs, stored in the
/// checkpoint metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub class: ClassLabel,
    pub features: FeatureConfig,
    pub patch: PatchGeometry,
    pub threshold: f32,
    pub config_fingerprint: String,
}

impl ModelMeta {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            class: cfg.class,
            features: cfg.features.clone(),
            patch: cfg.patch,
            threshold: cfg.threshold,
            config_fingerprint: cfg.fingerprint(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Prediction {
    pub probabilities: Array2<f32>,
    pub mask: BinaryMask,
}

/// A trained model with its metadata.
#[derive(Clone, Debug)]
pub struct Predictor {
    pub model: UNetModel<f32>,
    pub meta: ModelMeta,
}

impl Predictor {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let ckpt = load_model(path)?;
        let meta: ModelMeta = serde_json::from_value(ckpt.metadata)
            .map_err(|e| Error::MalformedHeader(format!("checkpoint metadata: {e}")))?;
        Ok(Self { model: ckpt.model, meta })
    }

    pub fn predict(&self, image: &MultispectralRaster) -> Result<Prediction> {
        self.predict_with_threshold(image, self.meta.threshold)
    }

    pub fn predict_with_threshold(&self, image: &MultispectralRaster, threshold: f32) -> Result<Prediction> {
        let features = prepare_features(image, &self.meta.features)?;
        let probabilities = predict_probabilities(&self.model, &self.meta, &features)?;
        let mask = threshold_map(&probabilities, threshold)?;
        Ok(Prediction { probabilities, mask })
    }
}

/// Reflect-pad, tile, predict and stitch.
pub fn predict_probabilities(model: &UNetModel<f32>, meta: &ModelMeta, features: &PlanarImage) -> Result<Array2<f32>> {
    if features.channels() != model.config().in_channels {
        return Err(Error::BandMismatch(format!(
            "image provides {} channels, model expects {}",
            features.channels(),
            model.config().in_channels
        )));
    }
    predict_tiled(features, &meta.patch, model, PREDICT_BATCH)
}

pub fn threshold_map(p: &Array2<f32>, threshold: f32) -> Result<BinaryMask> {
    let (h, w) = p.dim();
    BinaryMask::new(w, h, p.iter().map(|&v| (v >= threshold) as u8).collect())
}
