//! Settings that share a ratio class: doubling d_c while squaring k keeps
//! the bits per row fixed. Each point is trained on the same labels.
//!
//! cargo run --release --example level_sets

use slvq::budget::{asymptotic_ratio_class, level_set, vq_bytes, BudgetSpec};
use slvq::codec::{fit, TrainConfig};
use slvq::kd::{Augment, Pipeline, PipelineConfig, StudentConfig, TaskConfig};

fn main() -> slvq::Result<()> {
    let set = level_set(5, 2, 3)?;
    println!("level set from (k=2, d_c=5): {:?}", set.points);
    let at_scale = BudgetSpec::new(10, 1000, 300);
    for &(k, d_c) in &set.points {
        println!(
            "  k={k:<4} d_c={d_c:<3} class {:.1}  ImageNet ratio at d_h=1000: {:.2}x",
            asymptotic_ratio_class(d_c, k)?,
            vq_bytes(&at_scale.with_vq(1000, d_c, k))?.ratio
        );
    }

    let task = TaskConfig::new(2, 16, 20, 40);
    let pipeline = Pipeline::build(PipelineConfig {
        task,
        augment: Augment { views: 8, jitter: 0.3, seed: 2 },
        teacher: StudentConfig { hidden: 64, ..StudentConfig::default() },
        student: StudentConfig::default(),
        temperature: 1.0,
        teacher_per_class: None,
    })?;
    println!("\nsmall task, d_h=80:");
    for &(k, d_c) in &set.points {
        let mut cfg = TrainConfig::new(80, d_c as usize, k as usize);
        cfg.max_steps = 1500;
        let (model, trace) = fit(&pipeline.labels, &cfg)?;
        let rebuilt = model.decompress(&model.compress(&pipeline.labels)?, cfg.epsilon)?;
        println!(
            "  k={k:<4} d_c={d_c:<3} final L_rec {:.4}  KL {:.4}",
            trace.smoothed_reconstruction(100).last().unwrap(),
            pipeline.labels.mean_kl(&rebuilt)?
        );
    }
    Ok(())
}
