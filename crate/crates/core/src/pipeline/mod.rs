//! End-to-end orchestration: synthetic data, per-class training, tiled
//! prediction, evaluation, class statistics and the command line.

pub mod cli;
mod config;
pub mod evaluate;
mod features;
pub mod predict;
pub mod synth;
pub mod train;

pub use config::{FeatureConfig, ModelConfig, RunConfig, Stage, WaterSettings};
pub use evaluate::{class_stats, evaluate, ClassScore, ClassStat, EvalReport};
pub use features::prepare_features;
pub use predict::{ModelMeta, Prediction, Predictor};
pub use synth::{generate_scene, synth_generate, Dataset, Manifest, SynthConfig};
pub use train::{train, train_on, EpochRecord, TrainLog, TrainOutcome};
