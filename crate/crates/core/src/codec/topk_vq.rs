use nalgebra::DMatrix;

use super::model::{renormalize_rows, CodeIndexMatrix, VqaeModel};
use super::train::{fit_matrix, TrainConfig, TrainTrace};
use crate::baselines::select_topk;
use crate::error::{Error, Result};
use crate::labels::{softmax_labels, LogitMatrix, SoftLabelMatrix};

/// Top-k truncation followed by vector quantization of the kept values.
///
/// Each label keeps its `k_top` largest probabilities, ordered by rank, and
/// the autoencoder is trained on those `k_top`-dimensional value vectors.
/// The stored form is the VQ indices plus the kept class ids. When
/// `k_top == c` nothing is dropped, so values stay in class order and the
/// codec is the plain autoencoder on full labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TopkVqCodec {
    classes: usize,
    k_top: usize,
    model: VqaeModel,
    epsilon: f64,
}

/// Compressed form produced by [`TopkVqCodec::compress`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopkVqCodes {
    pub codes: CodeIndexMatrix,
    /// Row-major `n x k_top` kept class ids, highest probability first.
    pub classes: Vec<u32>,
}

impl TopkVqCodec {
    pub fn fit(
        logits: &LogitMatrix,
        k_top: usize,
        config: &TrainConfig,
    ) -> Result<(Self, TrainTrace)> {
        Self::fit_labels(&softmax_labels(logits), k_top, config)
    }

    pub fn fit_labels(
        labels: &SoftLabelMatrix,
        k_top: usize,
        config: &TrainConfig,
    ) -> Result<(Self, TrainTrace)> {
        let values = Self::values(labels, k_top)?.0;
        let (model, trace) = fit_matrix(&values, config)?;
        Ok((
            Self {
                classes: labels.c(),
                k_top,
                model,
                epsilon: config.epsilon,
            },
            trace,
        ))
    }

    pub fn from_parts(classes: usize, k_top: usize, model: VqaeModel, epsilon: f64) -> Result<Self> {
        if model.classes() != k_top || k_top > classes || k_top == 0 {
            return Err(Error::dim(format!(
                "model over {} values cannot serve top-{k_top} of {classes} classes",
                model.classes()
            )));
        }
        Ok(Self {
            classes,
            k_top,
            model,
            epsilon,
        })
    }

    fn values(labels: &SoftLabelMatrix, k_top: usize) -> Result<(DMatrix<f64>, Vec<u32>)> {
        if k_top == labels.c() {
            let ids = (0..labels.n())
                .flat_map(|_| 0..labels.c() as u32)
                .collect();
            return Ok((labels.as_matrix().clone(), ids));
        }
        let selection = select_topk(labels.as_matrix(), k_top)?;
        Ok((selection.values, selection.classes))
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn k_top(&self) -> usize {
        self.k_top
    }

    pub fn model(&self) -> &VqaeModel {
        &self.model
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn compress(&self, labels: &SoftLabelMatrix) -> Result<TopkVqCodes> {
        if labels.c() != self.classes {
            return Err(Error::dim(format!(
                "labels have {} classes, codec expects {}",
                labels.c(),
                self.classes
            )));
        }
        let (values, classes) = Self::values(labels, self.k_top)?;
        let codes = self.model.compress_matrix(&values)?;
        Ok(TopkVqCodes { codes, classes })
    }

    pub fn decompress(&self, stored: &TopkVqCodes) -> Result<SoftLabelMatrix> {
        let n = stored.codes.rows();
        if stored.classes.len() != n * self.k_top {
            return Err(Error::dim(format!(
                "{} class ids for {n} rows of top-{}",
                stored.classes.len(),
                self.k_top
            )));
        }
        let values = self.model.reconstruct_raw(&stored.codes)?;
        let mut full = DMatrix::zeros(n, self.classes);
        for r in 0..n {
            for s in 0..self.k_top {
                let class = stored.classes[r * self.k_top + s] as usize;
                if class >= self.classes {
                    return Err(Error::IndexOutOfRange {
                        index: class as u64,
                        codes: self.classes as u64,
                    });
                }
                full[(r, class)] = values[(r, s)];
            }
        }
        renormalize_rows(full, self.epsilon)
    }
}
