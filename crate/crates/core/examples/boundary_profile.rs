//! Trains a small building model briefly, then measures how its per-pixel
//! loss grows from the patch center toward the edges.

use msseg::patchwork::{boundary_profile, Uncropped};
use msseg::pipeline::{generate_scene, prepare_features, train_on, RunConfig, Stage};
use msseg::raster::ClassLabel;

fn main() -> msseg::Result<()> {
    let cfg = RunConfig {
        schedule: vec![Stage {
            epochs: 2,
            learning_rate: 1e-3,
        }],
        batches_per_epoch: 20,
        model: msseg::pipeline::ModelConfig {
            base_channels: 8,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut data = Vec::new();
    for i in 0..4 {
        let s = generate_scene(5, i, 256, 1.0)?;
        data.push((prepare_features(&s.image, &cfg.features)?, s.mask.binary(ClassLabel::Buildings)?));
    }
    let outcome = train_on(&cfg, &data[..3], &data[3..], |e| {
        println!("epoch {}: loss {:.4}", e.epoch, e.mean_loss)
    })?;

    let sources = data.iter().map(|(i, m)| (i, m)).collect();
    let profile = boundary_profile(&Uncropped(&outcome.model), sources, cfg.patch.input_size, 64, 0, 16)?;
    profile.write_csv(std::io::stdout().lock())?;
    match profile.trend() {
        Some(t) => println!("rank correlation of loss with distance from center: {t:.3}"),
        None => println!("rank correlation undefined"),
    }
    Ok(())
}
