//! A common face for every label codec, used by the distillation harness.

use crate::baselines::{
    topk_compress, topk_decompress, PcaCodec, ScalarQuantCodec, VqNoAeCodec, DEFAULT_EPSILON,
};
use crate::codec::{TopkVqCodec, VqaeModel};
use crate::error::Result;
use crate::labels::SoftLabelMatrix;

/// Compress-then-decompress on a whole label set.
pub trait LabelCodec {
    fn name(&self) -> String;
    fn roundtrip(&self, labels: &SoftLabelMatrix) -> Result<SoftLabelMatrix>;
}

/// Stores labels unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCodec;

impl LabelCodec for IdentityCodec {
    fn name(&self) -> String {
        "identity".into()
    }

    fn roundtrip(&self, labels: &SoftLabelMatrix) -> Result<SoftLabelMatrix> {
        Ok(labels.clone())
    }
}

/// A trained autoencoder paired with its renormalisation floor.
#[derive(Debug, Clone)]
pub struct VqaeCodec {
    pub model: VqaeModel,
    pub epsilon: f64,
}

impl LabelCodec for VqaeCodec {
    fn name(&self) -> String {
        format!(
            "vqae(d_h={}, d_c={}, k={})",
            self.model.latent_dim(),
            self.model.code_dim(),
            self.model.num_codes()
        )
    }

    fn roundtrip(&self, labels: &SoftLabelMatrix) -> Result<SoftLabelMatrix> {
        self.model
            .decompress(&self.model.compress(labels)?, self.epsilon)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TopkCodec {
    pub k_top: usize,
}

impl LabelCodec for TopkCodec {
    fn name(&self) -> String {
        format!("topk(k={})", self.k_top)
    }

    fn roundtrip(&self, labels: &SoftLabelMatrix) -> Result<SoftLabelMatrix> {
        topk_decompress(&topk_compress(labels, self.k_top)?)
    }
}

impl LabelCodec for PcaCodec {
    fn name(&self) -> String {
        format!("pca(k={})", self.num_components())
    }

    fn roundtrip(&self, labels: &SoftLabelMatrix) -> Result<SoftLabelMatrix> {
        self.decompress(&self.compress(labels)?, DEFAULT_EPSILON)
    }
}

impl LabelCodec for ScalarQuantCodec {
    fn name(&self) -> String {
        format!("quant(bits={})", self.bits())
    }

    fn roundtrip(&self, labels: &SoftLabelMatrix) -> Result<SoftLabelMatrix> {
        self.invert(&self.apply(labels)?, DEFAULT_EPSILON)
    }
}

impl LabelCodec for VqNoAeCodec {
    fn name(&self) -> String {
        format!(
            "vq-no-ae(d_c={}, k={})",
            self.model().code_dim(),
            self.model().num_codes()
        )
    }

    fn roundtrip(&self, labels: &SoftLabelMatrix) -> Result<SoftLabelMatrix> {
        self.decompress(&self.compress(labels)?)
    }
}

impl LabelCodec for TopkVqCodec {
    fn name(&self) -> String {
        format!(
            "topk-vq(k_top={}, d_c={}, k={})",
            self.k_top(),
            self.model().code_dim(),
            self.model().num_codes()
        )
    }

    fn roundtrip(&self, labels: &SoftLabelMatrix) -> Result<SoftLabelMatrix> {
        self.decompress(&self.compress(labels)?)
    }
}
