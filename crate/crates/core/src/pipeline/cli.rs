//! Command-line front end. The `msseg` binary only calls [`main`].

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::evaluate::{class_stats, evaluate, write_class_stats};
use super::predict::Predictor;
use super::synth::{synth_generate, Dataset, SynthConfig};
use super::{prepare_features, train, RunConfig, WaterSettings};
use crate::error::{Error, Result};
use crate::indices::{compute, segment_water, Connectivity, IndexBands, IndexKind};
use crate::pansharpen::{pansharpen, SharpenMethod};
use crate::patchwork::{boundary_profile, Uncropped};
use crate::raster::{load_mask, load_raster, save_mask, save_raster, BandName, ClassLabel, LabelMask, MultispectralRaster};

#[derive(Parser, Debug)]
#[command(name = "msseg", version, about = "Multispectral satellite image segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset with ground-truth masks.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        scenes: usize,
        #[arg(long, default_value_t = 512)]
        size: usize,
        #[arg(long, default_value_t = 1.0)]
        density: f64,
    },
    /// Fuse a panchromatic band with a multispectral image.
    Pansharpen {
        #[arg(long)]
        pan: PathBuf,
        #[arg(long)]
        ms: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `brovey` or `weighted:<w>` with w in [0, 1].
        #[arg(long, default_value = "brovey")]
        method: String,
    },
    /// Compute a reflectance index (ccci, ndwi, ndvi) as an f32 raster.
    Index {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        kind: IndexKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "NIR1")]
        nir: BandName,
    },
    /// Segment waterways and standing water with the index rule.
    Water {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run config whose `water` section supplies the rule parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        area_threshold: Option<usize>,
        #[arg(long)]
        connectivity: Option<u8>,
    },
    /// Train a single-class model.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Predict a class mask with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the probability map as an f32 raster.
        #[arg(long)]
        prob_out: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f32>,
    },
    /// Per-class Jaccard of predicted masks against ground truth.
    Evaluate {
        /// Predicted mask files, paired in order with `--truth`.
        #[arg(long, required = true, num_args = 1..)]
        pred: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        truth: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict both sides to these classes (default: all classes of the prediction).
        #[arg(long, num_args = 1..)]
        class: Vec<ClassLabel>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Per-class pixel fractions as CSV.
    ClassStats {
        /// Dataset directory; all masks of its manifest are counted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        mask: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean per-pixel loss by distance from the patch center.
    ProfileBoundary {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        patches: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_method(s: &str) -> Result<SharpenMethod> {
    match s.split_once(':') {
        None if s.eq_ignore_ascii_case("brovey") => Ok(SharpenMethod::Brovey),
        Some((m, w)) if m.eq_ignore_ascii_case("weighted") => w
            .parse::<f32>()
            .map(SharpenMethod::WeightedMean)
            .map_err(|_| Error::InvalidArgument(format!("bad weight `{w}`"))),
        _ => Err(Error::InvalidArgument(format!("unknown pansharpening method `{s}`"))),
    }
}

fn restrict(mask: &LabelMask, classes: &[ClassLabel]) -> Result<LabelMask> {
    LabelMask::from_planes(
        classes
            .iter()
            .map(|&c| Ok((c, mask.binary(c)?)))
            .collect::<Result<Vec<_>>>()?,
    )
}

fn probability_raster(p: &ndarray::Array2<f32>) -> Result<MultispectralRaster> {
    let (h, w) = p.dim();
    MultispectralRaster::from_f32_planes(w, h, vec![BandName::index("probability")], vec![p.iter().copied().collect()])
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            seed,
            scenes,
            size,
            density,
        } => {
            let m = synth_generate(
                &SynthConfig {
                    seed,
                    scenes,
                    size,
                    density,
                },
                &out,
            )?;
            println!("wrote {} scenes to {}", m.scenes.len(), out.display());
        }
        Command::Pansharpen { pan, ms, out, method } => {
            let sharp = pansharpen(&load_raster(pan)?, &load_raster(ms)?, parse_method(&method)?)?;
            save_raster(&sharp, out)?;
        }
        Command::Index { image, kind, out, nir } => {
            let r = load_raster(image)?.to_reflectance();
            save_raster(&compute(&r, kind, &IndexBands { nir })?.to_raster()?, out)?;
        }
        Command::Water {
            image,
            out,
            config,
            area_threshold,
            connectivity,
        } => {
            let mut settings = match config {
                Some(p) => RunConfig::load(p)?.water,
                None => WaterSettings::default(),
            };
            if let Some(a) = area_threshold {
                settings.area_threshold = a;
            }
            if let Some(c) = connectivity {
                settings.connectivity = Connectivity::from_number(c)?;
            }
            let seg = segment_water(&load_raster(image)?.to_reflectance(), &settings.rule())?;
            println!(
                "{} water bodies: {} waterway px, {} standing water px",
                seg.components.len(),
                seg.waterway.count(),
                seg.standing.count()
            );
            let mask = LabelMask::from_planes(vec![
                (ClassLabel::Waterway, seg.waterway),
                (ClassLabel::StandingWater, seg.standing),
            ])?;
            save_mask(&mask, out)?;
        }
        Command::Train { config } => {
            let cfg = RunConfig::load(config)?;
            let outcome = train(&cfg)?;
            println!(
                "trained {} for {} epochs; best validation jaccard {}; checkpoint {}",
                cfg.class,
                outcome.log.epochs.len(),
                outcome
                    .log
                    .best_validation_jaccard
                    .map_or("-".to_string(), |j| format!("{j:.4}")),
                cfg.model_path.display()
            );
        }
        Command::Predict {
            model,
            image,
            out,
            prob_out,
            threshold,
        } => {
            let p = Predictor::load(model)?;
            let image = load_raster(image)?;
            let pred = p.predict_with_threshold(&image, threshold.unwrap_or(p.meta.threshold))?;
            save_mask(&LabelMask::from_planes(vec![(p.meta.class, pred.mask)])?, out)?;
            if let Some(path) = prob_out {
                save_raster(&probability_raster(&pred.probabilities)?, path)?;
            }
        }
        Command::Evaluate {
            pred,
            truth,
            out,
            class,
            config,
        } => {
            if pred.len() != truth.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} prediction files but {} truth files",
                    pred.len(),
                    truth.len()
                )));
            }
            let mut pairs = Vec::with_capacity(pred.len());
            for (p, t) in pred.iter().zip(&truth) {
                let (p, t) = (load_mask(p)?, load_mask(t)?);
                let classes = if class.is_empty() { p.classes().to_vec() } else { class.clone() };
                pairs.push((restrict(&p, &classes)?, restrict(&t, &classes)?));
            }
            let mut report = evaluate(&pairs)?;
            if let Some(c) = config {
                report.config_fingerprint = Some(RunConfig::load(c)?.fingerprint());
            }
            for s in &report.classes {
                println!("{:<14} jaccard {:.4}", s.class.to_string(), s.jaccard);
            }
            println!("{:<14} jaccard {:.4}", "micro", report.micro_jaccard);
            if let Some(path) = out {
                report.save(path)?;
            }
        }
        Command::ClassStats { data, mask, out } => {
            let mut masks = Vec::new();
            if let Some(dir) = data {
                let ds = Dataset::open(dir)?;
                for e in ds.entries(None) {
                    masks.push(ds.load_mask(e)?);
                }
            }
            for m in &mask {
                masks.push(load_mask(m)?);
            }
            let stats = class_stats(&masks);
            match out {
                Some(path) => {
                    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    write_class_stats(&stats, f)?;
                }
                None => write_class_stats(&stats, std::io::stdout().lock())?,
            }
        }
        Command::ProfileBoundary {
            model,
            data,
            out,
            patches,
            seed,
        } => {
            let p = Predictor::load(model)?;
            let ds = Dataset::open(data)?;
            let mut items = Vec::new();
            for e in ds.entries(None) {
                items.push((
                    prepare_features(&ds.load_image(e)?, &p.meta.features)?,
                    ds.load_mask(e)?.binary(p.meta.class)?,
                ));
            }
            let sources = items.iter().map(|(i, m)| (i, m)).collect();
            let profile = boundary_profile(
                &Uncropped(&p.model),
                sources,
                p.meta.patch.input_size,
                patches,
                seed,
                super::predict::PREDICT_BATCH,
            )?;
            profile.save_csv(&out)?;
            match profile.trend() {
                Some(t) => println!("loss-vs-distance rank correlation: {t:.3}"),
                None => println!("loss-vs-distance rank correlation: undefined"),
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 on success, 2 for configuration
/// errors, 3 for data errors, 4 for numerical failures.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    run_from(std::env::args_os())
}
