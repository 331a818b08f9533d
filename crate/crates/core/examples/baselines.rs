//! Every codec on the same teacher labels: storage ratio, KL to the
//! originals and how often the top class survives.
//!
//! cargo run --release --example baselines

use slvq::baselines::{PcaCodec, ScalarQuantCodec, VqNoAeCodec};
use slvq::budget::{pca_bytes, quant_bytes, topk_bytes, vq_bytes, BudgetSpec};
use slvq::codec::{fit, TrainConfig};
use slvq::kd::{Augment, Pipeline, PipelineConfig, StudentConfig, TaskConfig};
use slvq::lossy::{LabelCodec, TopkCodec, VqaeCodec};
use slvq::SoftLabelMatrix;

fn argmax_agreement(a: &SoftLabelMatrix, b: &SoftLabelMatrix) -> f64 {
    let top = |m: &SoftLabelMatrix, i: usize| m.as_matrix().row(i).transpose().argmax().0;
    (0..a.n()).filter(|&i| top(a, i) == top(b, i)).count() as f64 / a.n() as f64
}

fn main() -> slvq::Result<()> {
    let task = TaskConfig { spread: 0.9, ..TaskConfig::new(1, 16, 40, 40) };
    let views = 10;
    let pipeline = Pipeline::build(PipelineConfig {
        task,
        augment: Augment { views, jitter: 0.2, seed: 1 },
        teacher: StudentConfig { hidden: 96, ..StudentConfig::default() },
        student: StudentConfig::default(),
        temperature: 1.0,
        teacher_per_class: Some(150),
    })?;
    let labels = &pipeline.labels;
    let spec = BudgetSpec::new(task.train_per_class as u64, task.classes as u64, views as u64);

    let mut cfg = TrainConfig::new(40, 8, 256);
    cfg.max_steps = 4000;
    cfg.lr = 3e-3;
    let (model, _) = fit(labels, &cfg)?;
    let vqae = VqaeCodec { model, epsilon: cfg.epsilon };
    let (no_ae, _) = VqNoAeCodec::fit(labels, 8, 256, &cfg)?;
    let quant = ScalarQuantCodec::fit(labels, 2)?;
    let pca = PcaCodec::fit(labels, 4)?;
    let topk = TopkCodec { k_top: 2 };

    let codecs: Vec<(&dyn LabelCodec, f64)> = vec![
        (&vqae, vq_bytes(&spec.with_vq(40, 8, 256))?.ratio),
        (&no_ae, vq_bytes(&spec.with_vq(40, 8, 256))?.ratio),
        (&quant, quant_bytes(&spec, 2)?.ratio),
        (&pca, pca_bytes(&spec, 4)?.ratio),
        (&topk, topk_bytes(&spec, 2)?.ratio),
    ];
    println!("{:<26} {:>8} {:>8} {:>8}", "codec", "ratio", "KL", "top-1");
    for (codec, ratio) in codecs {
        let rebuilt = codec.roundtrip(labels)?;
        println!(
            "{:<26} {:>7.2}x {:>8.4} {:>8.3}",
            codec.name(),
            ratio,
            labels.mean_kl(&rebuilt)?,
            argmax_agreement(labels, &rebuilt)
        );
    }
    Ok(())
}
