use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the Gaussian-cluster task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub dim: usize,
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Standard deviation of samples around their class centre. Centres
    /// themselves are standard normal, so spreads near 1 overlap heavily.
    pub spread: f64,
    pub seed: u64,
}

impl TaskConfig {
    pub fn new(seed: u64, dim: usize, classes: usize, train_per_class: usize) -> Self {
        Self {
            dim,
            classes,
            train_per_class,
            test_per_class: train_per_class,
            spread: 0.6,
            seed,
        }
    }
}

/// Class-balanced train and test splits drawn from per-class clusters.
/// Rows are ordered class-major: sample `i` has class `i / per_class`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub config: TaskConfig,
    pub centers: DMatrix<f64>,
    pub train_x: DMatrix<f64>,
    pub train_y: Vec<usize>,
    pub test_x: DMatrix<f64>,
    pub test_y: Vec<usize>,
}

impl SyntheticTask {
    pub fn from_config(config: TaskConfig) -> Result<Self> {
        if config.classes < 2 {
            return Err(Error::param("a task needs at least two classes"));
        }
        if config.dim == 0 || config.train_per_class == 0 {
            return Err(Error::param("task dimension and split sizes must be positive"));
        }
        if !(config.spread >= 0.0 && config.spread.is_finite()) {
            return Err(Error::param(format!("spread must be non-negative, got {}", config.spread)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (c, d) = (config.classes, config.dim);
        let centers = DMatrix::from_fn(c, d, |_, _| StandardNormal.sample(&mut rng));
        let mut draw = |per_class: usize| {
            let n = c * per_class;
            let labels: Vec<usize> = (0..n).map(|i| i / per_class).collect();
            let mut x = DMatrix::zeros(n, d);
            for (i, &y) in labels.iter().enumerate() {
                for j in 0..d {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    x[(i, j)] = centers[(y, j)] + config.spread * noise;
                }
            }
            (x, labels)
        };
        let (train_x, train_y) = draw(config.train_per_class);
        let (test_x, test_y) = draw(config.test_per_class);
        Ok(Self {
            config,
            centers,
            train_x,
            train_y,
            test_x,
            test_y,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    pub fn train_len(&self) -> usize {
        self.train_y.len()
    }

    /// Fraction of the test split belonging to the most common class.
    pub fn majority_baseline(&self) -> f64 {
        let mut counts = vec![0usize; self.classes()];
        for &y in &self.test_y {
            counts[y] += 1;
        }
        *counts.iter().max().unwrap_or(&0) as f64 / self.test_y.len().max(1) as f64
    }
}

/// Task with the default spread and equal-sized splits.
pub fn make_task(seed: u64, dim: usize, classes: usize, per_class: usize) -> Result<SyntheticTask> {
    SyntheticTask::from_config(TaskConfig::new(seed, dim, classes, per_class))
}
