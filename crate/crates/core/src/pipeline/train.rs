//! Per-class training: sample, augment, forward, joint loss, backward,
//! Nadam step; validation Jaccard after every epoch.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::predict::{predict_probabilities, ModelMeta};
use super::synth::{Dataset, Split};
use super::{prepare_features, RunConfig};
use crate::error::{Error, Result};
use crate::neuralnet::loss::{intersection_union, jaccard_from_counts};
use crate::neuralnet::{save_model, Nadam, UNetModel};
use crate::patchwork::{PatchSampler, PlanarImage};
use crate::raster::BinaryMask;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
    pub mean_bce: f64,
    pub mean_soft_jaccard: f64,
    pub validation_jaccard: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub class: String,
    pub config_fingerprint: String,
    pub parameters: usize,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (the last one without validation data).
    pub best_epoch: Option<usize>,
    pub best_validation_jaccard: Option<f64>,
    pub stopped_early: bool,
    pub seconds: f64,
}

pub struct TrainOutcome {
    pub model: UNetModel<f32>,
    pub meta: ModelMeta,
    pub log: TrainLog,
}

/// Images with the target class mask, ready for sampling.
pub type Labelled = (PlanarImage, BinaryMask);

/// Loads the train and validation splits of `cfg.data_dir` for `cfg.class`.
pub fn load_split(cfg: &RunConfig) -> Result<(Vec<Labelled>, Vec<Labelled>)> {
    let ds = Dataset::open(&cfg.data_dir)?;
    let mut train = Vec::new();
    let mut val = Vec::new();
    for e in ds.entries(None) {
        let image = prepare_features(&ds.load_image(e)?, &cfg.features)?;
        let mask = ds.load_mask(e)?.binary(cfg.class)?;
        match e.split {
            Split::Train => train.push((image, mask)),
            Split::Validation => val.push((image, mask)),
        }
    }
    Ok((train, val))
}

/// Micro-averaged Jaccard of thresholded tiled predictions.
pub fn validation_jaccard(model: &UNetModel<f32>, meta: &ModelMeta, val: &[Labelled]) -> Result<f64> {
    let (mut i, mut u) = (0, 0);
    for (image, truth) in val {
        let prob = predict_probabilities(model, meta, image)?;
        let pred: Vec<u8> = prob.iter().map(|&p| (p >= meta.threshold) as u8).collect();
        let (a, b) = intersection_union(&pred, truth.data());
        i += a;
        u += b;
    }
    Ok(jaccard_from_counts(i, u))
}

/// Trains on in-memory data. `on_epoch` sees every epoch record as it is
/// produced. Returns the best-by-validation model.
pub fn train_on(
    cfg: &RunConfig,
    train: &[Labelled],
    val: &[Labelled],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    check_trainable(cfg)?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training scenes".into()));
    }
    let started = Instant::now();
    let meta = ModelMeta::from_config(cfg);
    let mut model = UNetModel::<f32>::new(cfg.unet_config(), cfg.seed)?;
    let mut opt = Nadam::new(cfg.optimizer);
    let sampler = PatchSampler::new(train.iter().map(|(i, m)| (i, m)).collect(), cfg.patch, cfg.seed)?;
    if sampler.channels() != cfg.features.channels() {
        return Err(Error::BandMismatch(format!(
            "features have {} channels, config expects {}",
            sampler.channels(),
            cfg.features.channels()
        )));
    }

    let mut log = TrainLog {
        class: cfg.class.to_string(),
        config_fingerprint: cfg.fingerprint(),
        parameters: model.param_count(),
        epochs: Vec::new(),
        best_epoch: None,
        best_validation_jaccard: None,
        stopped_early: false,
        seconds: 0.0,
    };
    let mut best = model.clone();
    let mut step: u64 = 0;
    'stages: for stage in &cfg.schedule {
        for _ in 0..stage.epochs {
            let t0 = Instant::now();
            let (mut loss, mut bce, mut sj) = (0.0, 0.0, 0.0);
            for _ in 0..cfg.batches_per_epoch {
                let batch = sampler.batch(step * cfg.batch_size as u64, cfg.batch_size);
                step += 1;
                let v = model
                    .train_step(&mut opt, &batch.inputs, &batch.targets, cfg.jaccard_mode, stage.learning_rate)
                    .inspect_err(|e| log::error!("training diverged at step {step}: {e}"))?;
                loss += v.total;
                bce += v.bce;
                sj += v.soft_jaccard;
            }
            let nb = cfg.batches_per_epoch as f64;
            let epoch = log.epochs.len() + 1;
            let validation_jaccard = if val.is_empty() {
                None
            } else {
                Some(validation_jaccard(&model, &meta, val)?)
            };
            let record = EpochRecord {
                epoch,
                learning_rate: stage.learning_rate,
                mean_loss: loss / nb,
                mean_bce: bce / nb,
                mean_soft_jaccard: sj / nb,
                validation_jaccard,
                seconds: t0.elapsed().as_secs_f64(),
            };
            log::info!(
                "epoch {epoch}: loss {:.4} (bce {:.4}, soft jaccard {:.4}) val jaccard {}",
                record.mean_loss,
                record.mean_bce,
                record.mean_soft_jaccard,
                validation_jaccard.map_or("-".to_string(), |j| format!("{j:.4}"))
            );
            on_epoch(&record);
            log.epochs.push(record);
            let improved = match (validation_jaccard, log.best_validation_jaccard) {
                (None, _) => true,
                (Some(j), None) => j >= 0.0,
                (Some(j), Some(b)) => j > b,
            };
            if improved {
                best = model.clone();
                log.best_epoch = Some(epoch);
                log.best_validation_jaccard = validation_jaccard;
            }
            if let (Some(target), Some(j)) = (cfg.stop_at_jaccard, validation_jaccard) {
                if j >= target {
                    log.stopped_early = true;
                    break 'stages;
                }
            }
        }
    }
    log.seconds = started.elapsed().as_secs_f64();
    Ok(TrainOutcome { model: best, meta, log })
}

/// Loads the dataset named by `cfg`, trains, and writes the checkpoint and
/// the JSON log.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    check_trainable(cfg)?;
    let (train, val) = load_split(cfg)?;
    log::info!("training {} on {} scenes, validating on {}", cfg.class, train.len(), val.len());
    let outcome = train_on(cfg, &train, &val, |_| {})?;
    save_model(&outcome.model, &serde_json::to_value(&outcome.meta)?, &cfg.model_path)?;
    write_json(&cfg.log_path, &outcome.log)?;
    Ok(outcome)
}

fn check_trainable(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.uses_water_rule(cfg.class) {
        return Err(Error::Config(format!(
            "{} is segmented by the index rule; set water.use_network to train a network for it",
            cfg.class
        )));
    }
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
