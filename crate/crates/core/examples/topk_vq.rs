//! Keep each row's largest teacher probabilities, quantize those values
//! with the autoencoder and store the class ids alongside.
//!
//! cargo run --release --example topk_vq

use slvq::archive::CompressedArchive;
use slvq::budget::{topk_bytes, BudgetSpec};
use slvq::codec::{TopkVqCodec, TrainConfig};
use slvq::kd::{Augment, Pipeline, PipelineConfig, StudentConfig, TaskConfig};
use slvq::lossy::{LabelCodec, TopkCodec};

fn main() -> slvq::Result<()> {
    let task = TaskConfig::new(4, 16, 64, 20);
    let views = 5;
    let pipeline = Pipeline::build(PipelineConfig {
        task,
        augment: Augment { views, jitter: 0.3, seed: 4 },
        teacher: StudentConfig { hidden: 96, ..StudentConfig::default() },
        student: StudentConfig::default(),
        temperature: 3.0,
        teacher_per_class: None,
    })?;
    let labels = &pipeline.labels;
    let k_top = 20;

    let mut cfg = TrainConfig::new(20, 4, 64);
    cfg.max_steps = 2000;
    let (codec, _) = TopkVqCodec::fit_labels(labels, k_top, &cfg)?;
    let stored = codec.compress(labels)?;
    let archive = CompressedArchive::topk_vq(&codec, stored)?;
    let bytes = archive.to_bytes()?.len();

    let raw = (labels.n() * labels.c() * 2) as f64;
    let spec = BudgetSpec::new(task.train_per_class as u64, task.classes as u64, views as u64);
    let plain = topk_bytes(&spec, k_top as u64)?;
    println!("{} rows, {} classes, keeping the top {k_top}", labels.n(), labels.c());
    println!("top-k values at half precision  {:>8.0} bytes ({:.2}x)", plain.compressed_bytes, plain.ratio);
    println!("top-k then VQ archive           {:>8} bytes ({:.2}x)", bytes, raw / bytes as f64);
    println!("KL top-k          {:.4}", labels.mean_kl(&TopkCodec { k_top }.roundtrip(labels)?)?);
    println!("KL top-k then VQ  {:.4}", labels.mean_kl(&archive.decompress()?)?);
    Ok(())
}
