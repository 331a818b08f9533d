//! Compress a label set to an archive on disk, read it back and compare
//! the file size with the storage formula.
//!
//! cargo run --release --example compress_labels

use slvq::archive::{read_archive, write_archive, CompressedArchive};
use slvq::budget::{vq_bytes, BudgetSpec};
use slvq::codec::{fit, TrainConfig};
use slvq::kd::{Augment, Pipeline, PipelineConfig, StudentConfig, TaskConfig};

fn main() -> slvq::Result<()> {
    let task = TaskConfig::new(7, 16, 32, 50);
    let views = 6;
    let pipeline = Pipeline::build(PipelineConfig {
        task,
        augment: Augment { views, jitter: 0.3, seed: 7 },
        teacher: StudentConfig { hidden: 64, ..StudentConfig::default() },
        student: StudentConfig::default(),
        temperature: 1.0,
        teacher_per_class: None,
    })?;
    let labels = &pipeline.labels;

    let mut cfg = TrainConfig::new(32, 4, 64);
    cfg.max_steps = 2000;
    let (model, _) = fit(labels, &cfg)?;
    let archive = CompressedArchive::vqae(&model, cfg.epsilon, model.compress(labels)?)?;

    let path = std::env::temp_dir().join("slvq-example.slar");
    write_archive(&archive, &path)?;
    let on_disk = std::fs::metadata(&path)?.len();
    let back = read_archive(&path)?;
    assert_eq!(back, archive);

    let spec = BudgetSpec::new(task.train_per_class as u64, task.classes as u64, views as u64).with_vq(32, 4, 64);
    let predicted = vq_bytes(&spec)?;
    println!("labels       {} x {} ({:.0} bytes at half precision)", labels.n(), labels.c(), predicted.raw_bytes);
    println!("formula      {:.0} bytes ({:.2}x)", predicted.compressed_bytes, predicted.ratio);
    println!("file         {on_disk} bytes at {}", path.display());
    for c in &predicted.components {
        println!("  {:<10} {:.0}", c.name, c.bytes);
    }
    let rebuilt = back.decompress()?;
    println!("KL(original || decoded) {:.4}", labels.mean_kl(&rebuilt)?);
    std::fs::remove_file(&path)?;
    Ok(())
}
