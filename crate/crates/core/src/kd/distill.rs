use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::task::SyntheticTask;
use crate::error::{Error, Result};
use crate::labels::{softmax_in_place, SoftLabelMatrix};
use crate::lossy::LabelCodec;
use crate::optim::{AdamW, AdamWConfig};

/// Input-jitter augmentation. View `v` of the training split is a fixed
/// function of `(seed, v)`, so teacher caching and student training see the
/// same inputs without storing them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Augment {
    pub views: usize,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for Augment {
    fn default() -> Self {
        Self {
            views: 1,
            jitter: 0.0,
            seed: 0,
        }
    }
}

impl Augment {
    pub fn inputs(&self, task: &SyntheticTask, view: usize) -> DMatrix<f64> {
        let mut x = task.train_x.clone();
        if self.jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(view as u64);
            for v in x.iter_mut() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                *v += self.jitter * noise;
            }
        }
        x
    }

    fn all_views(&self, task: &SyntheticTask) -> Result<Vec<DMatrix<f64>>> {
        if self.views == 0 {
            return Err(Error::param("at least one augmentation view is required"));
        }
        Ok((0..self.views).map(|v| self.inputs(task, v)).collect())
    }
}

/// Training settings shared by teacher and students.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for StudentConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 30,
            batch_size: 64,
            lr: 3e-3,
            weight_decay: 0.01,
            temperature: 1.0,
            seed: 0,
        }
    }
}

impl StudentConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::param("hidden width and batch size must be positive"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::param(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::param(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Soft-target training: minimises KL(target ‖ softmax(z / τ)) per batch.
/// `epoch_data(e)` returns the inputs and targets for epoch `e`.
/// Returns the mean loss of every epoch.
fn fit_network<'a>(
    mlp: &mut Mlp,
    config: &StudentConfig,
    mut epoch_data: impl FnMut(usize) -> (&'a DMatrix<f64>, DMatrix<f64>),
) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = AdamW::new(AdamWConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..AdamWConfig::default()
    });
    let tau = config.temperature;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (x, y) = epoch_data(epoch);
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xb = x.select_rows(batch);
            let yb = y.select_rows(batch);
            let act = mlp.forward_full(&xb);
            let mut probs = act.logits.clone();
            for mut row in probs.row_iter_mut() {
                softmax_in_place(row.iter_mut(), tau);
            }
            total += kl_sum(&yb, &probs);
            let grad = (probs - &yb) / (tau * batch.len() as f64);
            mlp.apply_gradient(&xb, &act, &grad, &mut opt)?;
        }
        history.push(total / x.nrows().max(1) as f64);
    }
    Ok(history)
}

fn kl_sum(targets: &DMatrix<f64>, probs: &DMatrix<f64>) -> f64 {
    targets
        .iter()
        .zip(probs.iter())
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &p)| t * (t.ln() - p.max(f64::MIN_POSITIVE).ln()))
        .sum()
}

fn one_hot(labels: &[usize], classes: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(labels.len(), classes);
    for (i, &y) in labels.iter().enumerate() {
        m[(i, y)] = 1.0;
    }
    m
}

/// Trains a network on hard labels (cross-entropy) over the augmented views.
pub fn train_teacher(task: &SyntheticTask, augment: &Augment, config: &StudentConfig) -> Result<Mlp> {
    let views = augment.all_views(task)?;
    let mut mlp = Mlp::new(task.dim(), config.hidden, task.classes(), &mut ChaCha8Rng::seed_from_u64(config.seed));
    let targets = one_hot(&task.train_y, task.classes());
    let hard = StudentConfig {
        temperature: 1.0,
        ..*config
    };
    fit_network(&mut mlp, &hard, |e| (&views[e % views.len()], targets.clone()))?;
    Ok(mlp)
}

/// Teacher probabilities at temperature `tau` for every view. Rows are
/// grouped by view: row `v * n + i` is view `v` of training sample `i`.
pub fn cache_teacher_labels(
    teacher: &Mlp,
    task: &SyntheticTask,
    augment: &Augment,
    tau: f64,
) -> Result<SoftLabelMatrix> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("temperature must be positive, got {tau}")));
    }
    let n = task.train_len();
    let mut all = DMatrix::zeros(n * augment.views, task.classes());
    for (v, x) in augment.all_views(task)?.iter().enumerate() {
        let mut logits = teacher.logits(x);
        for mut row in logits.row_iter_mut() {
            softmax_in_place(row.iter_mut(), tau);
        }
        all.rows_mut(v * n, n).copy_from(&logits);
    }
    SoftLabelMatrix::new(all, Default::default())
}

/// Trains a fresh student on cached labels; epoch `e` consumes view
/// `e mod views`. Returns the student and its per-epoch mean KL.
pub fn train_student_kl(
    task: &SyntheticTask,
    augment: &Augment,
    labels: &SoftLabelMatrix,
    config: &StudentConfig,
) -> Result<(Mlp, Vec<f64>)> {
    let n = task.train_len();
    if labels.n() != n * augment.views || labels.c() != task.classes() {
        return Err(Error::dim(format!(
            "labels are {}x{}, expected {} views of {n} samples over {} classes",
            labels.n(),
            labels.c(),
            augment.views,
            task.classes()
        )));
    }
    let views = augment.all_views(task)?;
    let mut mlp = Mlp::new(task.dim(), config.hidden, task.classes(), &mut ChaCha8Rng::seed_from_u64(config.seed));
    let y = labels.as_matrix();
    let history = fit_network(&mut mlp, config, |e| {
        let v = e % views.len();
        (&views[v], y.rows(v * n, n).into_owned())
    })?;
    Ok((mlp, history))
}

/// Test-split accuracy.
pub fn evaluate_student(model: &Mlp, task: &SyntheticTask) -> f64 {
    let hits = model
        .predict(&task.test_x)
        .iter()
        .zip(&task.test_y)
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / task.test_y.len().max(1) as f64
}

/// Raw-label versus reconstructed-label student outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillReport {
    pub codec: String,
    pub raw_accuracy: f64,
    pub reconstructed_accuracy: f64,
    pub retention: f64,
    pub mean_kl: f64,
    pub storage_ratio: f64,
}

/// Trains one student on `labels` and one on `codec`'s reconstruction,
/// with identical seeds, and reports the accuracy retained.
pub fn compare(
    codec: &dyn LabelCodec,
    task: &SyntheticTask,
    augment: &Augment,
    labels: &SoftLabelMatrix,
    config: &StudentConfig,
    storage_ratio: f64,
) -> Result<DistillReport> {
    let reconstructed = codec.roundtrip(labels)?;
    let (raw, rec) = std::thread::scope(|s| {
        let raw = s.spawn(|| train_student_kl(task, augment, labels, config));
        let rec = train_student_kl(task, augment, &reconstructed, config);
        (raw.join().expect("student thread panicked"), rec)
    });
    let raw_accuracy = evaluate_student(&raw?.0, task);
    let reconstructed_accuracy = evaluate_student(&rec?.0, task);
    Ok(DistillReport {
        codec: codec.name(),
        raw_accuracy,
        reconstructed_accuracy,
        retention: reconstructed_accuracy / raw_accuracy,
        mean_kl: labels.mean_kl(&reconstructed)?,
        storage_ratio,
    })
}

/// `(ratio, retention)` pairs with the codec name, one row per report.
pub fn write_retention_csv<W: Write>(w: W, reports: &[DistillReport]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        ratio: f64,
        retention: f64,
        codec: &'a str,
    }
    let mut out = csv::Writer::from_writer(w);
    for r in reports {
        out.serialize(Row {
            ratio: r.storage_ratio,
            retention: r.retention,
            codec: &r.codec,
        })
        .map_err(|e| Error::format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}
