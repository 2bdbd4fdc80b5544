//! Trains a quick tree model, predicts the validation scene, and prints a
//! per-class report plus class statistics of the dataset.

use msseg::pipeline::{
    class_stats, evaluate, generate_scene, prepare_features, train_on, Predictor, RunConfig, Stage,
};
use msseg::raster::{ClassLabel, LabelMask};

fn main() -> msseg::Result<()> {
    let cfg = RunConfig {
        class: ClassLabel::Trees,
        schedule: vec![Stage {
            epochs: 3,
            learning_rate: 1e-3,
        }],
        batches_per_epoch: 25,
        ..Default::default()
    };
    let scenes: Vec<_> = (0..5).map(|i| generate_scene(2, i, 256, 1.0)).collect::<Result<_, _>>()?;
    let data: Vec<_> = scenes
        .iter()
        .map(|s| Ok((prepare_features(&s.image, &cfg.features)?, s.mask.binary(cfg.class)?)))
        .collect::<msseg::Result<_>>()?;
    let outcome = train_on(&cfg, &data[..4], &data[4..], |_| {})?;
    let predictor = Predictor {
        model: outcome.model,
        meta: outcome.meta,
    };

    let held_out = &scenes[4];
    let pred = predictor.predict(&held_out.image)?;
    let pred = LabelMask::from_planes(vec![(cfg.class, pred.mask)])?;
    let truth = LabelMask::from_planes(vec![(cfg.class, held_out.mask.binary(cfg.class)?)])?;
    let mut report = evaluate(&[(pred, truth)])?;
    report.config_fingerprint = Some(cfg.fingerprint());
    println!("{}", report.to_json()?);

    let masks: Vec<_> = scenes.iter().map(|s| s.mask.clone()).collect();
    for s in class_stats(&masks) {
        println!("{:>14} {:>8} px {:6.2}%", s.class.to_string(), s.pixel_count, 100.0 * s.fraction);
    }
    Ok(())
}
