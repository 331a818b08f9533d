mod support;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slvq::archive::{read_archive, read_model, write_archive, write_model, CodecId, CompressedArchive, ModelMeta};
use slvq::baselines::{topk_compress, PcaCodec, ScalarQuantCodec, VqNoAeCodec};
use slvq::budget::{vq_bytes, BudgetSpec};
use slvq::codec::{fit, CodeIndexMatrix, GradientMode, TopkVqCodec, TrainConfig, VqaeModel};
use slvq::labels::{read_slab, write_slab};
use slvq::{Error, SoftLabelMatrix};
use support::dirichlet_labels;

fn small_config(d_h: usize, d_c: usize, k: usize) -> TrainConfig {
    let mut cfg = TrainConfig::new(d_h, d_c, k);
    cfg.max_steps = 50;
    cfg.batch_size = 8;
    cfg.seed = 3;
    cfg
}

fn every_codec(labels: &SoftLabelMatrix) -> Vec<CompressedArchive> {
    let (model, _) = fit(labels, &small_config(6, 2, 8)).unwrap();
    let vqae = CompressedArchive::vqae(&model, 1e-8, model.compress(labels).unwrap()).unwrap();

    let topk = CompressedArchive::topk(&topk_compress(labels, 3).unwrap());

    let quant = ScalarQuantCodec::fit(labels, 3).unwrap();
    let quant = CompressedArchive::quant(labels.c(), &quant, quant.apply(labels).unwrap()).unwrap();

    let pca = PcaCodec::fit(labels, 4).unwrap();
    let pca = CompressedArchive::pca(&pca, &pca.compress(labels).unwrap()).unwrap();

    let (nae, _) = VqNoAeCodec::fit(labels, 3, 8, &small_config(12, 3, 8)).unwrap();
    let nae = CompressedArchive::vq_no_ae(&nae, nae.compress(labels).unwrap()).unwrap();

    let (tvq, _) = TopkVqCodec::fit_labels(labels, 4, &small_config(4, 2, 4)).unwrap();
    let tvq = CompressedArchive::topk_vq(&tvq, tvq.compress(labels).unwrap()).unwrap();

    vec![vqae, topk, quant, pca, nae, tvq]
}

#[test]
fn every_codec_round_trips_byte_identically() {
    let labels = dirichlet_labels(40, 12, 0.3, 1);
    let archives = every_codec(&labels);
    let ids: Vec<CodecId> = archives.iter().map(|a| a.codec_id()).collect();
    assert_eq!(
        ids,
        [CodecId::Vqae, CodecId::Topk, CodecId::Quant, CodecId::Pca, CodecId::VqNoAe, CodecId::TopkVq]
    );
    let dir = tempfile::tempdir().unwrap();
    for (i, archive) in archives.iter().enumerate() {
        let bytes = archive.to_bytes().unwrap();
        let back = CompressedArchive::from_bytes(&bytes).unwrap();
        assert_eq!(&back, archive, "codec {:?}", archive.codec_id());
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.rows(), 40);
        assert_eq!(back.classes(), 12);
        let original = archive.decompress().unwrap();
        assert_eq!(back.decompress().unwrap(), original);

        let path = dir.path().join(format!("a{i}.slar"));
        write_archive(archive, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
        assert_eq!(read_archive(&path).unwrap(), *archive);
    }
}

#[test]
fn decompress_then_recompress_reproduces_the_archive() {
    let labels = dirichlet_labels(60, 10, 0.5, 8);
    let (model, _) = fit(&labels, &small_config(10, 5, 16)).unwrap();
    let model = model.rounded_to_single();
    let codes = model.compress(&labels).unwrap();
    let first = CompressedArchive::vqae(&model, 1e-8, codes).unwrap();
    let bytes = first.to_bytes().unwrap();
    let restored = CompressedArchive::from_bytes(&bytes).unwrap();
    assert_eq!(restored.to_bytes().unwrap(), bytes);
}

#[test]
fn corruption_is_detected() {
    let labels = dirichlet_labels(10, 6, 0.5, 2);
    for archive in every_codec(&labels) {
        let bytes = archive.to_bytes().unwrap();
        for pos in [7, bytes.len() / 2, bytes.len() - 5] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x10;
            assert!(matches!(CompressedArchive::from_bytes(&bad), Err(Error::Checksum { .. })));
        }
        assert!(CompressedArchive::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}

#[test]
fn empty_archive_holds_only_header_and_parameters() {
    let labels = dirichlet_labels(30, 8, 0.5, 4);
    let (model, _) = fit(&labels, &small_config(4, 2, 4)).unwrap();
    let empty = SoftLabelMatrix::empty(8).unwrap();
    let codes = model.compress(&empty).unwrap();
    assert_eq!(codes.rows(), 0);
    let archive = CompressedArchive::vqae(&model, 1e-8, codes).unwrap();
    let bytes = archive.to_bytes().unwrap();
    let params = (4 * 2 + 4 * 8) * 4;
    assert!(bytes.len() > params && bytes.len() < params + 64);
    let back = CompressedArchive::from_bytes(&bytes).unwrap();
    assert_eq!(back.decompress().unwrap().n(), 0);
}

#[test]
fn ten_x_setting_file_size_tracks_the_budget() {
    // 10,000 stored rows under the (d_h=795, d_c=5, k=1024) setting
    let (c, d_h, d_c, k, n) = (1000, 795, 5, 1024, 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = VqaeModel::new(
        DMatrix::zeros(c, d_h),
        DMatrix::from_fn(d_h, c, |_, _| rng.random_range(-0.1..0.1)),
        DMatrix::from_fn(k, d_c, |_, _| rng.random_range(-1.0..1.0)),
    )
    .unwrap();
    let m = d_h / d_c;
    let data: Vec<u32> = (0..n * m).map(|_| rng.random_range(0..k as u32)).collect();
    let codes = CodeIndexMatrix::new(n, m, k, data).unwrap();
    let bytes = CompressedArchive::vqae(&model, 1e-8, codes).unwrap().to_bytes().unwrap();

    let predicted = vq_bytes(&BudgetSpec::new(10, 1000, 1).with_vq(d_h as u64, d_c as u64, k as u64))
        .unwrap()
        .compressed_bytes;
    let overhead = (bytes.len() as f64 - predicted) / predicted;
    assert!((0.0..0.01).contains(&overhead), "overhead {overhead}");
}

#[test]
fn model_file_round_trip() {
    let labels = dirichlet_labels(50, 9, 0.4, 6);
    let (model, _) = fit(&labels, &small_config(6, 3, 8)).unwrap();
    let meta = ModelMeta {
        gradient_mode: GradientMode::LiteralStopGradient,
        epsilon: 1e-6,
    };
    let mut buf = Vec::new();
    write_model(&model, &meta, &mut buf).unwrap();
    let (back, back_meta) = read_model(buf.as_slice()).unwrap();
    assert_eq!(back, model.rounded_to_single());
    assert_eq!(back_meta, meta);
}

#[test]
fn slab_round_trip() {
    let labels = dirichlet_labels(25, 7, 0.4, 10);
    let mut buf = Vec::new();
    write_slab(&labels, &mut buf).unwrap();
    let back = read_slab(buf.as_slice()).unwrap();
    assert_eq!(back.n(), 25);
    assert_eq!(back.c(), 7);
    let diff = (back.as_matrix() - labels.as_matrix()).abs().max();
    assert!(diff < 1e-3);
}
