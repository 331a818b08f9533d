//! Train students on raw and on reconstructed teacher labels at matched
//! storage and report accuracy retention. Takes about a minute in release
//! mode on one core.
//!
//! cargo run --release --example distill_compare -- [seed] [csv path]

use slvq::baselines::PcaCodec;
use slvq::budget::{pca_bytes, pca_within, topk_bytes, topk_within, vq_bytes};
use slvq::codec::{fit, TrainConfig};
use slvq::kd::{write_retention_csv, Pipeline, PipelineConfig};
use slvq::lossy::{LabelCodec, TopkCodec, VqaeCodec};

fn main() -> slvq::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let csv = args.next();

    let pipeline = Pipeline::build(PipelineConfig::desk_scale(seed))?;
    println!(
        "{} cached labels, teacher accuracy {:.3}",
        pipeline.labels.n(),
        pipeline.teacher_accuracy()
    );
    let spec = pipeline.budget_spec();

    let mut cfg = TrainConfig::new(100, 25, 256);
    cfg.max_steps = 10_000;
    cfg.lr = 3e-3;
    cfg.seed = seed;
    let (model, _) = fit(&pipeline.labels, &cfg)?;
    let vqae = VqaeCodec { model, epsilon: cfg.epsilon };
    let vq = vq_bytes(&spec.with_vq(100, 25, 256))?;

    let k_top = topk_within(&spec, vq.compressed_bytes).unwrap_or(1);
    let k_pc = pca_within(&spec, vq.compressed_bytes).unwrap_or(1);
    let pca = PcaCodec::fit(&pipeline.labels, k_pc as usize)?;
    let topk = TopkCodec { k_top: k_top as usize };
    let codecs: Vec<(&dyn LabelCodec, f64)> = vec![
        (&vqae, vq.ratio),
        (&topk, topk_bytes(&spec, k_top)?.ratio),
        (&pca, pca_bytes(&spec, k_pc)?.ratio),
    ];
    let reports = pipeline.compare_many(&codecs)?;
    println!("{:<26} {:>8} {:>8} {:>8} {:>9}", "codec", "ratio", "raw", "rebuilt", "retention");
    for r in &reports {
        println!(
            "{:<26} {:>7.2}x {:>8.3} {:>8.3} {:>9.3}",
            r.codec, r.storage_ratio, r.raw_accuracy, r.reconstructed_accuracy, r.retention
        );
    }
    if let Some(path) = csv {
        write_retention_csv(std::fs::File::create(&path)?, &reports)?;
        println!("wrote {path}");
    }
    Ok(())
}
