use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use msseg::indices::ndwi;
use msseg::neuralnet::{load_model, JaccardMode};
use msseg::patchwork::{PatchGeometry, PlanarImage};
use msseg::pipeline::predict::predict_probabilities;
use msseg::pipeline::synth::{Split, Surface};
use msseg::pipeline::{
    class_stats, evaluate, generate_scene, synth_generate, train, Dataset, EvalReport, ModelConfig,
    Predictor, RunConfig, Stage, SynthConfig,
};
use msseg::raster::{BandName, ClassLabel, LabelMask, MultispectralRaster, RasterData};
use msseg::{Error, ErrorKind};

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (p.strip_prefix(dir).unwrap().to_path_buf(), bytes)
        })
        .collect()
}

fn small_config(data: &Path, out: &Path, tag: &str) -> RunConfig {
    RunConfig {
        data_dir: data.to_path_buf(),
        model_path: out.join(format!("{tag}.msm")),
        log_path: out.join(format!("{tag}.json")),
        class: ClassLabel::Buildings,
        patch: PatchGeometry::new(32, 24).unwrap(),
        model: ModelConfig {
            base_channels: 4,
            depth: 2,
            ..ModelConfig::default()
        },
        schedule: vec![Stage {
            epochs: 1,
            learning_rate: 1e-3,
        }],
        batches_per_epoch: 1,
        batch_size: 2,
        seed: 11,
        ..RunConfig::default()
    }
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = SynthConfig {
        seed: 5,
        scenes: 3,
        size: 64,
        density: 1.0,
    };
    synth_generate(&cfg, a.path()).unwrap();
    synth_generate(&cfg, b.path()).unwrap();
    assert_eq!(files(a.path()), files(b.path()));
    synth_generate(&SynthConfig { seed: 6, ..cfg }, c.path()).unwrap();
    assert_ne!(files(a.path()), files(c.path()));
}

#[test]
fn empty_synth_writes_a_readable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth_generate(
        &SynthConfig {
            scenes: 0,
            size: 64,
            ..SynthConfig::default()
        },
        dir.path(),
    )
    .unwrap();
    assert!(m.scenes.is_empty());
    assert_eq!(Dataset::open(dir.path()).unwrap().manifest, m);
}

#[test]
fn validation_split_is_every_fifth_scene() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth_generate(
        &SynthConfig {
            scenes: 10,
            size: 32,
            ..SynthConfig::default()
        },
        dir.path(),
    )
    .unwrap();
    let val: Vec<usize> = m
        .scenes
        .iter()
        .enumerate()
        .filter(|(_, e)| e.split == Split::Validation)
        .map(|(i, _)| i)
        .collect();
    assert_eq!(val, vec![4, 9]);
}

fn nd(a: f64, b: f64) -> f64 {
    (a - b) / (a + b)
}

#[test]
fn signatures_put_water_and_land_on_opposite_ndwi_sides() {
    // Green is column 2, NIR1 column 6.
    for s in [Surface::River, Surface::Pond] {
        let sig = s.signature();
        assert!(nd(sig[2], sig[6]) > 0.5);
    }
    for s in [Surface::Soil, Surface::Crops, Surface::Road, Surface::Tree, Surface::Building] {
        let sig = s.signature();
        assert!(nd(sig[2], sig[6]) < -0.05, "{s:?}");
    }

    let scene = generate_scene(2, 0, 128, 1.0).unwrap();
    let map = ndwi(&scene.image.to_reflectance()).unwrap();
    let water = scene.mask.binary(ClassLabel::Waterway).unwrap();
    let standing = scene.mask.binary(ClassLabel::StandingWater).unwrap();
    assert!(water.count() > 0 && standing.count() > 0);
    for (p, v) in map.values.iter().enumerate() {
        let is_water = water.data()[p] == 1 || standing.data()[p] == 1;
        assert_eq!(*v > 0.0, is_water, "pixel {p} ndwi {v}");
    }
}

#[test]
fn class_stats_follow_area_arithmetic() {
    // Two 10x10 masks: a 4x5 building block and a 3x3 block, plus 7 tree pixels.
    let classes = vec![ClassLabel::Buildings, ClassLabel::Trees];
    let mut a = LabelMask::empty(10, 10, classes.clone());
    for y in 0..5 {
        for x in 0..4 {
            a.plane_mut(ClassLabel::Buildings).unwrap()[y * 10 + x] = 1;
        }
    }
    let mut b = LabelMask::empty(10, 10, classes);
    for y in 0..3 {
        for x in 0..3 {
            b.plane_mut(ClassLabel::Buildings).unwrap()[y * 10 + x] = 1;
        }
    }
    for p in 0..7 {
        b.plane_mut(ClassLabel::Trees).unwrap()[90 + p] = 1;
    }
    let stats = class_stats(&[a, b]);
    assert_eq!(stats.len(), ClassLabel::ALL.len());
    let get = |c| stats.iter().find(|s| s.class == c).unwrap();
    assert_eq!(get(ClassLabel::Buildings).pixel_count, 29);
    assert!((get(ClassLabel::Buildings).fraction - 29.0 / 200.0).abs() < 1e-12);
    assert!((get(ClassLabel::Trees).fraction - 7.0 / 200.0).abs() < 1e-12);
    assert_eq!(get(ClassLabel::Road).pixel_count, 0);
    assert!(class_stats(&[]).iter().all(|s| s.fraction == 0.0));
}

#[test]
fn class_stats_match_generator_surfaces() {
    let scene = generate_scene(9, 3, 96, 1.0).unwrap();
    let stats = class_stats(std::slice::from_ref(&scene.mask));
    for s in stats {
        let expected = scene.surfaces.iter().filter(|x| x.class() == Some(s.class)).count();
        assert_eq!(s.pixel_count as usize, expected, "{}", s.class);
    }
}

#[test]
fn eval_report_round_trips_and_scores_match_counts() {
    let classes = vec![ClassLabel::Buildings, ClassLabel::Trees];
    let mut truth = LabelMask::empty(4, 4, classes.clone());
    let mut pred = LabelMask::empty(4, 4, classes);
    truth.plane_mut(ClassLabel::Buildings).unwrap()[..6].fill(1);
    pred.plane_mut(ClassLabel::Buildings).unwrap()[2..8].fill(1);
    let report = evaluate(&[(pred, truth)]).unwrap();
    let b = report.class(ClassLabel::Buildings).unwrap();
    assert_eq!((b.intersection, b.union), (4, 8));
    assert!((b.jaccard - 0.5).abs() < 1e-12);
    assert_eq!(report.class(ClassLabel::Trees).unwrap().jaccard, 1.0);
    let back = EvalReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn water_class_needs_the_network_switch() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), dir.path(), "w");
    cfg.class = ClassLabel::Waterway;
    let err = train(&cfg).err().unwrap();
    assert!(matches!(err, Error::Config(_)), "{err}");
    assert_eq!(err.kind(), ErrorKind::Config);
}

#[test]
fn config_rejects_unknown_fields_and_keeps_defaults() {
    assert!(matches!(RunConfig::from_json(r#"{"bach_size": 4}"#), Err(Error::Config(_))));
    let cfg = RunConfig::from_json(r#"{"batch_size": 4, "jaccard_mode": "per_pixel_mean"}"#).unwrap();
    assert_eq!(cfg.batch_size, 4);
    assert_eq!(cfg.jaccard_mode, JaccardMode::PerPixelMean);
    assert_eq!(cfg.schedule, RunConfig::default().schedule);
    assert_ne!(cfg.fingerprint(), RunConfig::default().fingerprint());
}

#[test]
fn train_predict_is_deterministic_and_read_only() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth_generate(
        &SynthConfig {
            seed: 1,
            scenes: 5,
            size: 64,
            density: 1.0,
        },
        data.path(),
    )
    .unwrap();
    let before = files(data.path());

    let cfg_a = small_config(data.path(), out.path(), "a");
    train(&cfg_a).unwrap();
    let first = std::fs::read(&cfg_a.model_path).unwrap();
    let a = train(&cfg_a).unwrap();
    assert_eq!(std::fs::read(&cfg_a.model_path).unwrap(), first);

    let log: serde_json::Value = serde_json::from_slice(&std::fs::read(&cfg_a.log_path).unwrap()).unwrap();
    assert_eq!(log["epochs"].as_array().unwrap().len(), 1);
    assert_eq!(log["config_fingerprint"], cfg_a.fingerprint());
    assert_eq!(a.log.parameters, a.model.param_count());

    let ckpt = load_model(&cfg_a.model_path).unwrap();
    assert_eq!(ckpt.model.params().len(), a.model.params().len());

    let predictor = Predictor::load(&cfg_a.model_path).unwrap();
    let ds = Dataset::open(data.path()).unwrap();
    let entry = ds.entries(Some(Split::Validation)).next().unwrap();
    let image = ds.load_image(entry).unwrap();
    let p1 = predictor.predict(&image).unwrap();
    let p2 = predictor.predict(&image).unwrap();
    assert_eq!(p1.probabilities.dim(), (64, 64));
    assert_eq!(p1.mask.width(), 64);
    assert_eq!(p1.probabilities, p2.probabilities);
    assert!(p1.probabilities.iter().all(|v| *v > 0.0 && *v < 1.0));

    assert_eq!(files(data.path()), before);
}

#[test]
fn stitched_map_does_not_depend_on_tile_layout() {
    // A depth-1 network sees at most 11 px around each output pixel, so a
    // 12 px crop leaves every kept pixel free of zero-padding effects and
    // the stitched map must not depend on where tile borders fall.
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth_generate(
        &SynthConfig {
            seed: 4,
            scenes: 2,
            size: 64,
            density: 1.0,
        },
        data.path(),
    )
    .unwrap();
    let mut cfg = small_config(data.path(), out.path(), "s");
    cfg.patch = PatchGeometry::new(48, 24).unwrap();
    cfg.model.depth = 1;
    cfg.batches_per_epoch = 4;
    let outcome = train(&cfg).unwrap();

    let (w, h) = (100, 76);
    let planes: Vec<Vec<f32>> = (0..cfg.features.channels())
        .map(|b| {
            (0..w * h)
                .map(|p| {
                    let (x, y) = ((p % w) as f32, (p / w) as f32);
                    0.4 + 0.3 * ((x + 3.0 * b as f32) / 40.0).sin() * (y / 55.0).cos()
                })
                .collect()
        })
        .collect();
    let smooth = PlanarImage::new(w, h, planes).unwrap();
    let reference = predict_probabilities(&outcome.model, &outcome.meta, &smooth).unwrap();
    for (input, output) in [(40, 16), (56, 32), (64, 40)] {
        let mut meta = outcome.meta.clone();
        meta.patch = PatchGeometry::new(input, output).unwrap();
        let map = predict_probabilities(&outcome.model, &meta, &smooth).unwrap();
        let worst = map.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(worst < 1e-5, "{input}/{output}: {worst}");
    }
}

#[test]
fn predicting_with_wrong_bands_is_a_data_error() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth_generate(
        &SynthConfig {
            seed: 4,
            scenes: 1,
            size: 64,
            density: 1.0,
        },
        data.path(),
    )
    .unwrap();
    let cfg = small_config(data.path(), out.path(), "m");
    train(&cfg).unwrap();
    let predictor = Predictor::load(&cfg.model_path).unwrap();
    let rgb = MultispectralRaster::new(
        64,
        64,
        vec![BandName::Red, BandName::Green, BandName::Blue],
        11,
        RasterData::U16(vec![100; 3 * 64 * 64]),
    )
    .unwrap();
    let err = predictor.predict(&rgb).err().unwrap();
    assert_eq!(err.kind(), ErrorKind::Data, "{err}");
}
