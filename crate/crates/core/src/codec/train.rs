use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::cache_loss_matrix;
use super::model::VqaeModel;
use crate::error::{Error, Result};
use crate::labels::SoftLabelMatrix;
use crate::optim::{AdamW, AdamWConfig};

/// How reconstruction gradients treat the quantizer on the backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Quantization is the identity on the backward pass, so the
    /// reconstruction loss reaches the encoder.
    #[default]
    StraightThrough,
    /// The quantized latent is a constant; only the commitment term
    /// trains the encoder.
    LiteralStopGradient,
}

impl GradientMode {
    pub(crate) fn tag(self) -> u8 {
        match self {
            GradientMode::StraightThrough => 0,
            GradientMode::LiteralStopGradient => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(GradientMode::StraightThrough),
            1 => Ok(GradientMode::LiteralStopGradient),
            other => Err(Error::format(format!("unknown gradient mode {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub code_dim: usize,
    pub num_codes: usize,
    /// Weight on the VQ terms.
    pub alpha: f64,
    /// Commitment weight.
    pub beta: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub gradient_mode: GradientMode,
    /// Floor used when renormalising reconstructions.
    pub epsilon: f64,
    /// Re-seed codes that went unused for a full pass over the data.
    pub dead_code_reinit: bool,
}

impl TrainConfig {
    pub fn new(latent_dim: usize, code_dim: usize, num_codes: usize) -> Self {
        Self {
            latent_dim,
            code_dim,
            num_codes,
            alpha: 1.0,
            beta: 0.25,
            lr: 1e-3,
            weight_decay: 0.01,
            batch_size: 128,
            max_steps: 2000,
            seed: 0,
            gradient_mode: GradientMode::StraightThrough,
            epsilon: 1e-8,
            dead_code_reinit: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.code_dim == 0 || self.num_codes == 0 {
            return Err(Error::param("model dimensions must be positive"));
        }
        if !self.latent_dim.is_multiple_of(self.code_dim) {
            return Err(Error::param(format!(
                "latent dim {} is not divisible by code dim {}",
                self.latent_dim, self.code_dim
            )));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::param("alpha and beta must be non-negative"));
        }
        if !(self.epsilon > 0.0 && self.lr > 0.0) {
            return Err(Error::param("epsilon and lr must be positive"));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::param("weight decay must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be positive"));
        }
        Ok(())
    }

    fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }
}

/// Per-step losses and code usage recorded by [`fit`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub reconstruction: Vec<f64>,
    pub vq: Vec<f64>,
    pub total: Vec<f64>,
    pub usage: Vec<Vec<u32>>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    fn push(&mut self, reconstruction: f64, vq: f64, total: f64, usage: Vec<u32>) {
        self.reconstruction.push(reconstruction);
        self.vq.push(vq);
        self.total.push(total);
        self.usage.push(usage);
    }

    /// Trailing moving average of the reconstruction loss.
    pub fn smoothed_reconstruction(&self, window: usize) -> Vec<f64> {
        moving_average(&self.reconstruction, window)
    }
}

pub(crate) fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Which parameters the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Trainable {
    All,
    CodebookOnly,
}

/// Trains a model on every row of `labels` with AdamW.
pub fn fit(labels: &SoftLabelMatrix, config: &TrainConfig) -> Result<(VqaeModel, TrainTrace)> {
    fit_matrix(labels.as_matrix(), config)
}

pub(crate) fn fit_matrix(data: &DMatrix<f64>, config: &TrainConfig) -> Result<(VqaeModel, TrainTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (encoder, decoder) = init_projections(data.ncols(), config, &mut rng)?;
    train(data, encoder, decoder, config, Trainable::All, &mut rng)
}

/// The model `fit` starts from, before any optimizer step.
pub fn init_model(labels: &SoftLabelMatrix, config: &TrainConfig) -> Result<VqaeModel> {
    let zero = TrainConfig {
        max_steps: 0,
        ..config.clone()
    };
    fit(labels, &zero).map(|(model, _)| model)
}

fn init_projections(
    classes: usize,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    config.validate()?;
    let d_h = config.latent_dim;
    let enc_bound = (6.0 / classes.max(1) as f64).sqrt();
    let dec_bound = (6.0 / d_h as f64).sqrt();
    let encoder = DMatrix::from_fn(classes, d_h, |_, _| rng.random_range(-enc_bound..enc_bound));
    let decoder = DMatrix::from_fn(d_h, classes, |_, _| rng.random_range(-dec_bound..dec_bound));
    Ok((encoder, decoder))
}

/// Shared optimisation loop. The codebook is seeded from encoder outputs of
/// the first batch (continuing into later rows if that batch holds fewer
/// than `k` segments).
pub(crate) fn train(
    data: &DMatrix<f64>,
    encoder: DMatrix<f64>,
    decoder: DMatrix<f64>,
    config: &TrainConfig,
    trainable: Trainable,
    rng: &mut ChaCha8Rng,
) -> Result<(VqaeModel, TrainTrace)> {
    config.validate()?;
    let n = data.nrows();
    if n < config.batch_size {
        return Err(Error::param(format!(
            "{n} rows is fewer than the batch size {}",
            config.batch_size
        )));
    }
    let (d_c, k, m) = (
        config.code_dim,
        config.num_codes,
        config.latent_dim / config.code_dim,
    );

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let codebook = seed_codebook(data, &encoder, &order, config, rng);
    let mut model = VqaeModel::new(encoder, decoder, codebook)?;

    let mut optimizer = AdamW::new(config.optimizer());
    let mut trace = TrainTrace::default();
    let steps_per_pass = n.div_ceil(config.batch_size);
    let mut cursor = 0;
    let mut pass_usage = vec![0u64; k];

    for step in 0..config.max_steps {
        if cursor + config.batch_size > n {
            order.shuffle(rng);
            cursor = 0;
        }
        let rows = &order[cursor..cursor + config.batch_size];
        cursor += config.batch_size;
        let batch = data.select_rows(rows);

        let loss = match cache_loss_matrix(&batch, &model, config) {
            Ok(loss) => loss,
            Err(Error::NonFinite(reason)) => {
                return Err(Error::Diverged {
                    step,
                    reason,
                    trace: Box::new(trace),
                })
            }
            Err(other) => return Err(other),
        };
        for (acc, &u) in pass_usage.iter_mut().zip(&loss.usage) {
            *acc += u as u64;
        }

        let grads = loss.grads;
        {
            let (enc, dec, book) = model.parts_mut();
            match trainable {
                Trainable::All => optimizer.step(&mut [
                    (enc.as_mut_slice(), grads.encoder.as_slice()),
                    (dec.as_mut_slice(), grads.decoder.as_slice()),
                    (book.as_mut_slice(), grads.codebook.as_slice()),
                ]),
                Trainable::CodebookOnly => {
                    optimizer.step(&mut [(book.as_mut_slice(), grads.codebook.as_slice())])
                }
            }
        }
        trace.push(loss.reconstruction, loss.vq, loss.total, loss.usage);

        if config.dead_code_reinit && (step + 1) % steps_per_pass == 0 {
            let dead: Vec<usize> = (0..k).filter(|&j| pass_usage[j] == 0).collect();
            if !dead.is_empty() {
                let latents = batch * model.encoder();
                let slot = match trainable {
                    Trainable::All => 2,
                    Trainable::CodebookOnly => 0,
                };
                let (_, _, book) = model.parts_mut();
                for j in dead {
                    let r = rng.random_range(0..latents.nrows());
                    let s = rng.random_range(0..m);
                    for t in 0..d_c {
                        book[(j, t)] = latents[(r, s * d_c + t)];
                    }
                    // nalgebra storage is column-major: entry (j, t) sits at t * k + j
                    for t in 0..d_c {
                        optimizer.reset(slot, t * k + j..t * k + j + 1);
                    }
                }
            }
            pass_usage.iter_mut().for_each(|u| *u = 0);
        }
    }
    Ok((model, trace))
}

fn seed_codebook(
    data: &DMatrix<f64>,
    encoder: &DMatrix<f64>,
    order: &[usize],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let (d_c, k) = (config.code_dim, config.num_codes);
    let m = config.latent_dim / d_c;
    // enough rows to supply k segments, starting with the first batch
    let rows_needed = config.batch_size.max(k.div_ceil(m)).min(order.len());
    let latents = data.select_rows(&order[..rows_needed]) * encoder;
    let available = rows_needed * m;
    let segment_key = |p: usize| -> Vec<u64> {
        let (r, s) = (p / m, p % m);
        (0..d_c).map(|t| latents[(r, s * d_c + t)].to_bits()).collect()
    };
    // distinct segments first, in random order; repeats only when the
    // candidates run out
    let mut candidates: Vec<usize> = (0..available).collect();
    candidates.shuffle(rng);
    let mut seen = HashSet::new();
    let mut picks: Vec<usize> = Vec::with_capacity(k);
    for &p in &candidates {
        if picks.len() == k {
            break;
        }
        if seen.insert(segment_key(p)) {
            picks.push(p);
        }
    }
    while picks.len() < k {
        picks.push(candidates[rng.random_range(0..available)]);
    }
    DMatrix::from_fn(k, d_c, |j, t| {
        let (r, s) = (picks[j] / m, picks[j] % m);
        latents[(r, s * d_c + t)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Precision;

    fn labels(n: usize, c: usize, seed: u64) -> SoftLabelMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = DMatrix::from_fn(n, c, |_, _| rng.random::<f64>().powi(4));
        for mut row in data.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        SoftLabelMatrix::new(data, Precision::Half).unwrap()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            batch_size: 16,
            max_steps: 50,
            ..TrainConfig::new(8, 2, 8)
        }
    }

    #[test]
    fn zero_steps_returns_initial_model() {
        let y = labels(40, 6, 1);
        let config = TrainConfig {
            max_steps: 0,
            ..small_config()
        };
        let (model, trace) = fit(&y, &config).unwrap();
        assert!(trace.is_empty());
        assert_eq!(model, init_model(&y, &small_config()).unwrap());
    }

    #[test]
    fn fit_is_deterministic() {
        let y = labels(40, 6, 2);
        let (a, ta) = fit(&y, &small_config()).unwrap();
        let (b, tb) = fit(&y, &small_config()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = fit(
            &y,
            &TrainConfig {
                seed: 9,
                ..small_config()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trace_lengths_match_steps() {
        let y = labels(40, 6, 3);
        let (_, trace) = fit(&y, &small_config()).unwrap();
        assert_eq!(trace.len(), 50);
        assert_eq!(trace.vq.len(), 50);
        assert_eq!(trace.reconstruction.len(), 50);
        assert_eq!(trace.usage.len(), 50);
        assert!(trace.usage.iter().all(|u| u.iter().sum::<u32>() == 16 * 4));
    }

    #[test]
    fn fit_needs_a_full_batch() {
        let y = labels(10, 6, 4);
        assert!(matches!(fit(&y, &small_config()), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn bad_configs_rejected() {
        let y = labels(40, 6, 5);
        for config in [
            TrainConfig::new(7, 2, 8),
            TrainConfig {
                alpha: -1.0,
                ..small_config()
            },
            TrainConfig {
                epsilon: 0.0,
                ..small_config()
            },
            TrainConfig {
                lr: 0.0,
                ..small_config()
            },
        ] {
            assert!(fit(&y, &config).is_err());
        }
    }

    #[test]
    fn divergence_reports_step_and_trace() {
        let y = labels(40, 6, 6);
        let config = TrainConfig {
            lr: 1e200,
            weight_decay: 0.0,
            ..small_config()
        };
        match fit(&y, &config) {
            Err(Error::Diverged { step, trace, .. }) => {
                assert!(step > 0);
                assert_eq!(trace.len(), step);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn dead_code_reinit_moves_unused_codes() {
        let y = labels(64, 6, 7);
        let base = TrainConfig {
            batch_size: 16,
            max_steps: 8,
            num_codes: 1024,
            ..small_config()
        };
        let (plain, _) = fit(&y, &base).unwrap();
        let (reinit, _) = fit(
            &y,
            &TrainConfig {
                dead_code_reinit: true,
                ..base
            },
        )
        .unwrap();
        assert_ne!(plain.codebook(), reinit.codebook());
    }

    #[test]
    fn moving_average_window() {
        assert_eq!(moving_average(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
    }
}
