//! Fit the autoencoder to teacher labels under both gradient rules and
//! compare the loss curves and reconstruction quality.
//!
//! cargo run --release --example train_codec

use slvq::codec::{fit, GradientMode, TrainConfig};
use slvq::kd::{Augment, Pipeline, PipelineConfig, StudentConfig, TaskConfig};

fn main() -> slvq::Result<()> {
    let config = PipelineConfig {
        task: TaskConfig::new(3, 16, 20, 40),
        augment: Augment { views: 8, jitter: 0.3, seed: 3 },
        teacher: StudentConfig { hidden: 64, ..StudentConfig::default() },
        student: StudentConfig::default(),
        temperature: 2.0,
        teacher_per_class: None,
    };
    let pipeline = Pipeline::build(config)?;
    let labels = &pipeline.labels;
    println!("{} teacher labels over {} classes, mean entropy {:.3} nats", labels.n(), labels.c(), labels.mean_entropy());

    for mode in [GradientMode::StraightThrough, GradientMode::LiteralStopGradient] {
        let mut cfg = TrainConfig::new(20, 4, 32);
        cfg.max_steps = 1500;
        cfg.gradient_mode = mode;
        cfg.seed = 3;
        let (model, trace) = fit(labels, &cfg)?;
        let smooth = trace.smoothed_reconstruction(100);
        let at = |f: f64| smooth[((smooth.len() - 1) as f64 * f) as usize];
        let rebuilt = model.decompress(&model.compress(labels)?, cfg.epsilon)?;
        println!(
            "{mode:?}: L_rec {:.4} -> {:.4} -> {:.4} -> {:.4}; KL(y || y_hat) {:.4}",
            at(0.0),
            at(0.33),
            at(0.66),
            at(1.0),
            labels.mean_kl(&rebuilt)?
        );
    }
    Ok(())
}
