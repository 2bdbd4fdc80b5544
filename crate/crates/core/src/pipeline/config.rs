//! Run configuration: one JSON document, every field defaulted, unknown
//! fields rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::indices::{Connectivity, IndexKind, WaterConfig};
use crate::neuralnet::{JaccardMode, NadamConfig, UNetConfig};
use crate::patchwork::PatchGeometry;
use crate::raster::{BandName, ClassLabel, DEFAULT_HIGH_PCT, DEFAULT_LOW_PCT};

/// How scene bands become network input channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub bands: Vec<BandName>,
    /// Index channels appended after the bands, computed on reflectance
    /// (undefined pixels become 0, values clamped to [-1, 1]).
    pub index_channels: Vec<IndexKind>,
    pub nir: BandName,
    pub low_pct: f64,
    pub high_pct: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let mut bands = BandName::M_BANDS.to_vec();
        bands.extend(BandName::swir_bands());
        Self {
            bands,
            index_channels: Vec::new(),
            nir: BandName::Nir1,
            low_pct: DEFAULT_LOW_PCT,
            high_pct: DEFAULT_HIGH_PCT,
        }
    }
}

impl FeatureConfig {
    pub fn channels(&self) -> usize {
        self.bands.len() + self.index_channels.len()
    }
}

/// Architecture knobs; input channels and output crop follow from the
/// features and the patch geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub base_channels: usize,
    pub depth: usize,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
    pub elu_alpha: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let u = UNetConfig::default();
        Self {
            base_channels: u.base_channels,
            depth: u.depth,
            bn_epsilon: u.bn_epsilon,
            bn_momentum: u.bn_momentum,
            elu_alpha: u.elu_alpha,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub epochs: usize,
    pub learning_rate: f64,
}

/// Water handling: the index rule's parameters plus a switch that hands
/// water classes to the network instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaterSettings {
    pub use_network: bool,
    pub ccci_threshold: f32,
    pub ndwi_threshold: f32,
    pub area_threshold: usize,
    pub connectivity: Connectivity,
    pub nir: BandName,
}

impl Default for WaterSettings {
    fn default() -> Self {
        let rule = WaterConfig::default();
        Self {
            use_network: false,
            ccci_threshold: rule.ccci_threshold,
            ndwi_threshold: rule.ndwi_threshold,
            area_threshold: rule.area_threshold,
            connectivity: rule.connectivity,
            nir: rule.nir,
        }
    }
}

impl WaterSettings {
    pub fn rule(&self) -> WaterConfig {
        WaterConfig {
            ccci_threshold: self.ccci_threshold,
            ndwi_threshold: self.ndwi_threshold,
            area_threshold: self.area_threshold,
            connectivity: self.connectivity,
            nir: self.nir.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub model_path: PathBuf,
    /// Per-epoch training log (JSON).
    pub log_path: PathBuf,
    pub class: ClassLabel,
    pub features: FeatureConfig,
    pub patch: PatchGeometry,
    pub model: ModelConfig,
    pub optimizer: NadamConfig,
    pub schedule: Vec<Stage>,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub jaccard_mode: JaccardMode,
    /// Probability at or above which a pixel is labelled.
    pub threshold: f32,
    /// Stop once validation Jaccard reaches this value.
    pub stop_at_jaccard: Option<f64>,
    pub water: WaterSettings,
}

impl Default for RunConfig {
    /// Desk-scale defaults: 64/48 patches, depth 3, base 16, batch 16,
    /// 20 epochs of 50 batches.
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            model_path: PathBuf::from("model.msm"),
            log_path: PathBuf::from("train_log.json"),
            class: ClassLabel::Buildings,
            features: FeatureConfig::default(),
            patch: PatchGeometry {
                input_size: 64,
                output_size: 48,
            },
            model: ModelConfig::default(),
            optimizer: NadamConfig::default(),
            schedule: vec![
                Stage {
                    epochs: 15,
                    learning_rate: 1e-3,
                },
                Stage {
                    epochs: 5,
                    learning_rate: 1e-4,
                },
            ],
            batches_per_epoch: 50,
            batch_size: 16,
            seed: 0,
            jaccard_mode: JaccardMode::Aggregate,
            threshold: 0.5,
            stop_at_jaccard: None,
            water: WaterSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.patch.validate()?;
        self.unet_config().validate()?;
        if self.schedule.is_empty() || self.schedule.iter().any(|s| !(s.learning_rate > 0.0)) {
            return Err(Error::Config("schedule needs at least one stage with a positive learning rate".into()));
        }
        if self.batch_size == 0 || self.batches_per_epoch == 0 {
            return Err(Error::Config("batch_size and batches_per_epoch must be at least 1".into()));
        }
        if self.features.channels() == 0 {
            return Err(Error::Config("no input channels selected".into()));
        }
        let f = &self.features;
        if !(0.0..1.0).contains(&f.low_pct) || !(f.low_pct < f.high_pct && f.high_pct <= 1.0) {
            return Err(Error::Config(format!("bad percentiles {} / {}", f.low_pct, f.high_pct)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.patch.input_size % (1 << self.model.depth) != 0 {
            return Err(Error::Config(format!(
                "patch input size {} is not a multiple of 2^depth = {}",
                self.patch.input_size,
                1 << self.model.depth
            )));
        }
        Ok(())
    }

    pub fn unet_config(&self) -> UNetConfig {
        UNetConfig {
            in_channels: self.features.channels(),
            base_channels: self.model.base_channels,
            depth: self.model.depth,
            output_crop: self.patch.margin(),
            bn_epsilon: self.model.bn_epsilon,
            bn_momentum: self.model.bn_momentum,
            elu_alpha: self.model.elu_alpha,
        }
    }

    /// Whether `class` goes through the index rule instead of the network.
    pub fn uses_water_rule(&self, class: ClassLabel) -> bool {
        class.is_water() && !self.water.use_network
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn total_epochs(&self) -> usize {
        self.schedule.iter().map(|s| s.epochs).sum()
    }
}
