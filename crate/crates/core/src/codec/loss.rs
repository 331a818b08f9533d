use nalgebra::DMatrix;

use super::model::VqaeModel;
use super::train::{GradientMode, TrainConfig};
use crate::error::{Error, Result};
use crate::labels::SoftLabelMatrix;

/// Gradients with the same shapes as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: DMatrix<f64>,
    pub decoder: DMatrix<f64>,
    pub codebook: DMatrix<f64>,
}

/// Batch-averaged caching loss and its gradients.
#[derive(Debug, Clone)]
pub struct CacheLoss {
    /// `alpha * vq + reconstruction`.
    pub total: f64,
    /// Mean squared reconstruction error `||y_hat - y||^2`.
    pub reconstruction: f64,
    /// Mean of the unweighted VQ term, `sum_i (1 + beta) ||h_i - mu_q||^2`.
    pub vq: f64,
    pub grads: Gradients,
    /// How many segments in the batch picked each code.
    pub usage: Vec<u32>,
}

pub fn cache_loss_and_grads(
    batch: &SoftLabelMatrix,
    model: &VqaeModel,
    config: &TrainConfig,
) -> Result<CacheLoss> {
    cache_loss_matrix(batch.as_matrix(), model, config)
}

/// Loss on an arbitrary batch matrix; the rows need not be probability
/// vectors (the top-k path trains on truncated value vectors).
///
/// Stop-gradient handling: the codebook term only moves the codebook, the
/// commitment term only moves the encoder, and the reconstruction term moves
/// the decoder, plus the encoder when the quantizer is treated as the
/// identity on the backward pass.
pub(crate) fn cache_loss_matrix(
    batch: &DMatrix<f64>,
    model: &VqaeModel,
    config: &TrainConfig,
) -> Result<CacheLoss> {
    let b = batch.nrows();
    if b == 0 {
        return Err(Error::param("empty batch"));
    }
    let latents = model.encode_batch(batch)?;
    let (d_h, d_c, k) = (model.latent_dim(), model.code_dim(), model.num_codes());
    let codebook = model.codebook();
    let scale = 1.0 / b as f64;
    let (alpha, beta) = (config.alpha, config.beta);

    let mut quantized = DMatrix::zeros(b, d_h);
    let mut grad_latent = DMatrix::zeros(b, d_h);
    let mut grad_codebook = DMatrix::zeros(k, d_c);
    let mut usage = vec![0u32; k];
    let mut vq_sum = 0.0;
    let mut segment = vec![0.0; d_c];

    for r in 0..b {
        for s in 0..model.segments() {
            let offset = s * d_c;
            for (t, v) in segment.iter_mut().enumerate() {
                *v = latents[(r, offset + t)];
            }
            if let Some(v) = segment.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("latent of batch row {r} contains {v}")));
            }
            let (q, dist) = model.nearest_code(&segment);
            usage[q] += 1;
            vq_sum += (1.0 + beta) * dist;
            for t in 0..d_c {
                let mu = codebook[(q, t)];
                let diff = segment[t] - mu;
                quantized[(r, offset + t)] = mu;
                grad_codebook[(q, t)] -= 2.0 * alpha * scale * diff;
                grad_latent[(r, offset + t)] = 2.0 * alpha * beta * scale * diff;
            }
        }
    }

    let mut residual = &quantized * model.decoder();
    residual -= batch;
    let rec_sum = residual.norm_squared();
    let grad_output = residual * (2.0 * scale);
    let grad_decoder = quantized.transpose() * &grad_output;
    if config.gradient_mode == GradientMode::StraightThrough {
        grad_latent += &grad_output * model.decoder().transpose();
    }
    let grad_encoder = batch.transpose() * grad_latent;

    let reconstruction = rec_sum * scale;
    let vq = vq_sum * scale;
    let total = alpha * vq + reconstruction;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss is {total} (reconstruction {reconstruction}, vq {vq})"
        )));
    }
    Ok(CacheLoss {
        total,
        reconstruction,
        vq,
        grads: Gradients {
            encoder: grad_encoder,
            decoder: grad_decoder,
            codebook: grad_codebook,
        },
        usage,
    })
}
