//! Compares the U-Net's analytic gradients with central finite differences
//! at several step sizes.

use msseg::neuralnet::gradcheck::UNetObjective;
use msseg::neuralnet::{gradient_check, GradCheckConfig, JaccardMode, Tensor4, UNetConfig, UNetModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> msseg::Result<()> {
    let cfg = UNetConfig {
        in_channels: 1,
        base_channels: 4,
        depth: 2,
        output_crop: 2,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Tensor4::from_vec(1, 1, 16, 16, (0..256).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let y = Tensor4::from_vec(1, 1, 12, 12, (0..144).map(|_| rng.random_range(0..2) as f64).collect())?;
    let model = UNetModel::<f64>::new(cfg, 0)?;
    println!("{} trainable parameters", model.param_count());

    for step in [1e-3, 1e-4, 1e-5] {
        let mut obj = UNetObjective::new(model.clone(), x.clone(), y.clone(), JaccardMode::Aggregate);
        let report = gradient_check(
            &mut obj,
            &GradCheckConfig {
                step,
                samples: 300,
                ..Default::default()
            },
        )?;
        let mut errors: Vec<f64> = report.entries.iter().map(|e| e.relative_error).collect();
        errors.sort_by(f64::total_cmp);
        let worst = report.worst().expect("non-empty");
        println!(
            "h = {step:e}: median relative error {:.2e}, max {:.2e} at {}[{}]",
            errors[errors.len() / 2],
            report.max_relative_error,
            worst.tensor,
            worst.index
        );
    }
    Ok(())
}
