use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{train, CodeIndexMatrix, TrainConfig, TrainTrace, Trainable, VqaeModel};
use crate::error::{Error, Result};
use crate::labels::SoftLabelMatrix;

/// Segment quantization applied directly to the probability vector: the
/// encoder and decoder are fixed identities and only the codebook is learned.
#[derive(Debug, Clone, PartialEq)]
pub struct VqNoAeCodec {
    model: VqaeModel,
    epsilon: f64,
}

impl VqNoAeCodec {
    /// Trains the codebook with the caching loss. `base` supplies the
    /// optimizer settings; its model dimensions are replaced by
    /// `(c, code_dim, num_codes)`.
    pub fn fit(
        labels: &SoftLabelMatrix,
        code_dim: usize,
        num_codes: usize,
        base: &TrainConfig,
    ) -> Result<(Self, TrainTrace)> {
        let c = labels.c();
        if code_dim == 0 || !c.is_multiple_of(code_dim) {
            return Err(Error::param(format!(
                "{c} classes are not divisible into blocks of {code_dim}"
            )));
        }
        let config = TrainConfig {
            latent_dim: c,
            code_dim,
            num_codes,
            ..base.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let eye = DMatrix::identity(c, c);
        let (model, trace) = train(
            labels.as_matrix(),
            eye.clone(),
            eye,
            &config,
            Trainable::CodebookOnly,
            &mut rng,
        )?;
        Ok((
            Self {
                model,
                epsilon: config.epsilon,
            },
            trace,
        ))
    }

    pub fn from_codebook(classes: usize, codebook: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        let eye = DMatrix::identity(classes, classes);
        Ok(Self {
            model: VqaeModel::new(eye.clone(), eye, codebook)?,
            epsilon,
        })
    }

    pub fn model(&self) -> &VqaeModel {
        &self.model
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn compress(&self, labels: &SoftLabelMatrix) -> Result<CodeIndexMatrix> {
        self.model.compress(labels)
    }

    pub fn decompress(&self, codes: &CodeIndexMatrix) -> Result<SoftLabelMatrix> {
        self.model.decompress(codes, self.epsilon)
    }
}
