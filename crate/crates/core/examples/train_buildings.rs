//! Generates a synthetic dataset and trains the building detector with the
//! desk-scale configuration, printing loss and validation Jaccard per epoch.
//!
//! cargo run --release --example train_buildings -- [scenes] [epochs]

use msseg::pipeline::{synth_generate, train, RunConfig, Stage, SynthConfig};

fn main() -> msseg::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let scenes: usize = args.next().map_or(20, |s| s.parse().expect("scene count"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epoch count"));

    let dir = std::env::temp_dir().join("msseg_train_buildings");
    synth_generate(
        &SynthConfig {
            scenes,
            ..Default::default()
        },
        dir.join("data"),
    )?;

    let cfg = RunConfig {
        data_dir: dir.join("data"),
        model_path: dir.join("buildings.msm"),
        log_path: dir.join("buildings_log.json"),
        schedule: vec![
            Stage {
                epochs: epochs - epochs / 4,
                learning_rate: 1e-3,
            },
            Stage {
                epochs: epochs / 4,
                learning_rate: 1e-4,
            },
        ],
        ..Default::default()
    };
    let outcome = train(&cfg)?;
    println!(
        "best validation jaccard {:?} after epoch {:?} ({:.0} s); model at {}",
        outcome.log.best_validation_jaccard,
        outcome.log.best_epoch,
        outcome.log.seconds,
        cfg.model_path.display()
    );
    Ok(())
}
