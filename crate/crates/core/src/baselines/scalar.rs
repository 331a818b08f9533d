use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{renormalize_rows, CodeIndexMatrix};
use crate::error::{Error, Result};
use crate::labels::SoftLabelMatrix;

const LLOYD_ITERATIONS: usize = 100;
// k-means++ seeding runs on at most this many entries.
const SEEDING_SAMPLE: usize = 1 << 16;

/// Per-entry scalar quantizer with `2^bits` learned levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarQuantCodec {
    levels: Vec<f64>,
}

impl ScalarQuantCodec {
    pub fn from_levels(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || !levels.len().is_power_of_two() || levels.len() > 256 {
            return Err(Error::param(format!(
                "need 2^bits levels with bits in 0..=8, got {}",
                levels.len()
            )));
        }
        if levels.iter().any(|v| !v.is_finite()) || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "levels must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { levels })
    }

    pub fn fit(labels: &SoftLabelMatrix, bits: u32) -> Result<Self> {
        Self::fit_seeded(labels, bits, 0)
    }

    /// Lloyd-Max (1-D k-means) over every probability entry, seeded with
    /// k-means++.
    pub fn fit_seeded(labels: &SoftLabelMatrix, bits: u32, seed: u64) -> Result<Self> {
        if !(1..=8).contains(&bits) {
            return Err(Error::param(format!("bits must be in 1..=8, got {bits}")));
        }
        let k = 1usize << bits;
        let mut values: Vec<f64> = labels.as_matrix().iter().copied().collect();
        if values.is_empty() {
            return Err(Error::param("cannot fit levels on an empty label set"));
        }
        values.sort_by(f64::total_cmp);

        let mut distinct = values.clone();
        distinct.dedup();
        if distinct.len() <= k {
            return Self::from_levels(pad_levels(distinct, k));
        }

        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        for v in &values {
            prefix.push(prefix.last().unwrap() + v);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut levels = seed_plus_plus(&values, k, &mut rng);
        for _ in 0..LLOYD_ITERATIONS {
            let mut next = levels.clone();
            let mut lo = 0;
            for j in 0..k {
                let hi = if j + 1 < k {
                    let mid = 0.5 * (levels[j] + levels[j + 1]);
                    values.partition_point(|&v| v <= mid)
                } else {
                    values.len()
                };
                if hi > lo {
                    next[j] = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
                }
                lo = hi.max(lo);
            }
            next.sort_by(f64::total_cmp);
            if next == levels {
                break;
            }
            levels = next;
        }
        levels.dedup();
        Self::from_levels(pad_levels(levels, k))
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn bits(&self) -> u32 {
        self.levels.len().trailing_zeros()
    }

    /// Index of the nearest level; ties go to the lower level.
    pub fn quantize(&self, value: f64) -> u32 {
        let i = self.levels.partition_point(|&l| l < value);
        if i == 0 {
            return 0;
        }
        if i == self.levels.len() {
            return (i - 1) as u32;
        }
        if value - self.levels[i - 1] <= self.levels[i] - value {
            (i - 1) as u32
        } else {
            i as u32
        }
    }

    /// Level indices for every entry; the result is `n x c`.
    pub fn apply(&self, labels: &SoftLabelMatrix) -> Result<CodeIndexMatrix> {
        let data = labels.as_matrix();
        let mut codes = Vec::with_capacity(data.len());
        for r in 0..data.nrows() {
            for j in 0..data.ncols() {
                codes.push(self.quantize(data[(r, j)]));
            }
        }
        CodeIndexMatrix::new(data.nrows(), data.ncols(), self.levels.len(), codes)
    }

    /// Level values per entry, renormalised per row.
    pub fn invert(&self, codes: &CodeIndexMatrix, epsilon: f64) -> Result<SoftLabelMatrix> {
        if codes.codes() > self.levels.len() {
            return Err(Error::dim(format!(
                "indices address {} levels, codec has {}",
                codes.codes(),
                self.levels.len()
            )));
        }
        let raw = DMatrix::from_fn(codes.rows(), codes.cols(), |r, j| {
            self.levels[codes.row(r)[j] as usize]
        });
        renormalize_rows(raw, epsilon)
    }
}

/// Fills unused slots above the largest real level so the list stays
/// strictly increasing; padded levels are never nearest to any data.
fn pad_levels(mut levels: Vec<f64>, k: usize) -> Vec<f64> {
    let top = *levels.last().unwrap();
    let mut step = 1.0;
    while levels.len() < k {
        levels.push(top + step);
        step += 1.0;
    }
    levels
}

fn seed_plus_plus(sorted: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sample: Vec<f64> = if sorted.len() > SEEDING_SAMPLE {
        (0..SEEDING_SAMPLE)
            .map(|_| sorted[rng.random_range(0..sorted.len())])
            .collect()
    } else {
        sorted.to_vec()
    };
    let mut centers = vec![sample[rng.random_range(0..sample.len())]];
    let mut dist: Vec<f64> = sample.iter().map(|v| (v - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = sample.len() - 1;
            for (i, d) in dist.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            sample[pick]
        } else {
            sample[rng.random_range(0..sample.len())]
        };
        centers.push(next);
        for (d, v) in dist.iter_mut().zip(&sample) {
            *d = d.min((v - next).powi(2));
        }
    }
    centers.sort_by(f64::total_cmp);
    centers
}
