#![allow(dead_code)]

pub mod autodiff;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use slvq::codec::{GradientMode, VqaeModel};
use slvq::{Precision, SoftLabelMatrix};

pub const FD_STEP: f64 = 1e-6;

use autodiff::{Tape, Var};

/// Rows drawn from a symmetric Dirichlet(`concentration`) via normalised
/// Gamma draws.
pub fn dirichlet_labels(n: usize, c: usize, concentration: f64, seed: u64) -> SoftLabelMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(concentration, 1.0).unwrap();
    let mut data = DMatrix::zeros(n, c);
    for i in 0..n {
        loop {
            let row: Vec<f64> = (0..c).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                for (j, v) in row.into_iter().enumerate() {
                    data[(i, j)] = v / total;
                }
                break;
            }
        }
    }
    SoftLabelMatrix::new(data, Precision::Half).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn random_model(c: usize, d_h: usize, d_c: usize, k: usize, seed: u64) -> VqaeModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VqaeModel::new(
        random_matrix(c, d_h, 1.0, &mut rng),
        random_matrix(d_h, c, 1.0, &mut rng),
        random_matrix(k, d_c, 0.5, &mut rng),
    )
    .unwrap()
}

/// Loss terms evaluated on the tape, plus the leaves for each parameter.
pub struct TapeLoss {
    pub tape: Tape,
    pub total: Var,
    pub reconstruction: f64,
    pub encoder: Vec<Var>,
    pub decoder: Vec<Var>,
    pub codebook: Vec<Var>,
}

/// Caching loss written directly from its definition on the scalar tape:
/// nearest-code selection by brute force, stop-gradients as tape cuts, and
/// the straight-through estimator as `h + sg(mu - h)`.
pub fn tape_loss(
    batch: &DMatrix<f64>,
    model: &VqaeModel,
    alpha: f64,
    beta: f64,
    mode: GradientMode,
) -> TapeLoss {
    let tape = Tape::default();
    let (c, d_h, d_c, k) = (model.classes(), model.latent_dim(), model.code_dim(), model.num_codes());
    let leaves = |m: &DMatrix<f64>| -> Vec<Var> {
        (0..m.nrows() * m.ncols())
            .map(|i| tape.leaf(m[(i / m.ncols(), i % m.ncols())]))
            .collect()
    };
    // row-major leaves: entry (r, col) at r * ncols + col
    let p = leaves(model.encoder());
    let d = leaves(model.decoder());
    let mu = leaves(model.codebook());
    let b = batch.nrows();
    let mut vq_terms = Vec::new();
    let mut rec_terms = Vec::new();
    for r in 0..b {
        let h: Vec<Var> = (0..d_h)
            .map(|j| {
                let terms: Vec<(Var, f64)> = (0..c).map(|l| (p[l * d_h + j], batch[(r, l)])).collect();
                tape.weighted_sum(&terms)
            })
            .collect();
        let mut h_hat = Vec::with_capacity(d_h);
        for s in 0..d_h / d_c {
            let seg = &h[s * d_c..(s + 1) * d_c];
            let mut best = (0, f64::INFINITY);
            for q in 0..k {
                let dist: f64 = (0..d_c).map(|t| (seg[t].value - mu[q * d_c + t].value).powi(2)).sum();
                if dist < best.1 {
                    best = (q, dist);
                }
            }
            let q = best.0;
            for t in 0..d_c {
                let code = mu[q * d_c + t];
                let book = tape.sub(tape.stop(seg[t]), code);
                let commit = tape.sub(seg[t], tape.stop(code));
                vq_terms.push(tape.mul(book, book));
                let c2 = tape.mul(commit, commit);
                vq_terms.push(tape.scale(c2, beta));
                h_hat.push(match mode {
                    GradientMode::StraightThrough => {
                        let offset = tape.stop(tape.sub(code, seg[t]));
                        tape.add(seg[t], offset)
                    }
                    GradientMode::LiteralStopGradient => tape.stop(code),
                });
            }
        }
        for l in 0..c {
            let terms: Vec<Var> = (0..d_h).map(|j| tape.mul(h_hat[j], d[j * c + l])).collect();
            let y_hat = tape.sum(&terms);
            let diff = tape.sub(y_hat, tape.leaf(batch[(r, l)]));
            rec_terms.push(tape.mul(diff, diff));
        }
    }
    let vq = tape.sum(&vq_terms);
    let rec = tape.sum(&rec_terms);
    let reconstruction = rec.value / b as f64;
    let weighted = tape.add(tape.scale(vq, alpha), rec);
    let total = tape.scale(weighted, 1.0 / b as f64);
    TapeLoss {
        tape,
        total,
        reconstruction,
        encoder: p,
        decoder: d,
        codebook: mu,
    }
}

/// Gradient of the tape loss reshaped like `rows x cols`.
pub fn tape_gradient(loss: &TapeLoss, leaves: &[Var], rows: usize, cols: usize) -> DMatrix<f64> {
    let adj = loss.tape.gradient(loss.total);
    DMatrix::from_fn(rows, cols, |r, c| adj[leaves[r * cols + c].idx])
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// The loss with the code assignment, base latents and selected codes
/// frozen at the base point. It agrees with the caching loss there and is
/// smooth in every parameter, so central differences of it give the
/// gradient the stop-gradient rules prescribe.
pub struct Surrogate {
    y: DMatrix<f64>,
    h0: DMatrix<f64>,
    mu0: DMatrix<f64>,
    assign: Vec<Vec<usize>>,
    d_c: usize,
    alpha: f64,
    beta: f64,
    mode: GradientMode,
}

impl Surrogate {
    pub fn at(model: &VqaeModel, y: &DMatrix<f64>, alpha: f64, beta: f64, mode: GradientMode) -> Self {
        let h0 = y * model.encoder();
        let d_c = model.code_dim();
        let m = model.segments();
        let mut mu0 = DMatrix::zeros(y.nrows(), model.latent_dim());
        let mut assign = Vec::new();
        for r in 0..y.nrows() {
            let row: Vec<f64> = h0.row(r).iter().copied().collect();
            let mut picks = Vec::new();
            for s in 0..m {
                // brute-force argmin, first index on ties
                let seg = &row[s * d_c..(s + 1) * d_c];
                let mut best = (0, f64::INFINITY);
                for q in 0..model.num_codes() {
                    let d: f64 = (0..d_c).map(|t| (seg[t] - model.codebook()[(q, t)]).powi(2)).sum();
                    if d < best.1 {
                        best = (q, d);
                    }
                }
                for t in 0..d_c {
                    mu0[(r, s * d_c + t)] = model.codebook()[(best.0, t)];
                }
                picks.push(best.0);
            }
            assign.push(picks);
        }
        Self { y: y.clone(), h0, mu0, assign, d_c, alpha, beta, mode }
    }

    pub fn eval(&self, p: &DMatrix<f64>, d: &DMatrix<f64>, mu: &DMatrix<f64>) -> f64 {
        let h = &self.y * p;
        let mut total = 0.0;
        for r in 0..self.y.nrows() {
            let mut vq = 0.0;
            for (s, &q) in self.assign[r].iter().enumerate() {
                for t in 0..self.d_c {
                    let j = s * self.d_c + t;
                    vq += (self.h0[(r, j)] - mu[(q, t)]).powi(2);
                    vq += self.beta * (h[(r, j)] - self.mu0[(r, j)]).powi(2);
                }
            }
            let h_hat: Vec<f64> = (0..h.ncols())
                .map(|j| match self.mode {
                    GradientMode::StraightThrough => h[(r, j)] + self.mu0[(r, j)] - self.h0[(r, j)],
                    GradientMode::LiteralStopGradient => self.mu0[(r, j)],
                })
                .collect();
            let mut rec = 0.0;
            for l in 0..d.ncols() {
                let y_hat: f64 = (0..h.ncols()).map(|j| h_hat[j] * d[(j, l)]).sum();
                rec += (y_hat - self.y[(r, l)]).powi(2);
            }
            total += self.alpha * vq + rec;
        }
        total / self.y.nrows() as f64
    }
}

pub fn central_difference(f: impl Fn(&DMatrix<f64>) -> f64, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut grad = DMatrix::zeros(x.nrows(), x.ncols());
    let mut probe = x.clone();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let base = x[(i, j)];
            probe[(i, j)] = base + FD_STEP;
            let up = f(&probe);
            probe[(i, j)] = base - FD_STEP;
            let down = f(&probe);
            probe[(i, j)] = base;
            grad[(i, j)] = (up - down) / (2.0 * FD_STEP);
        }
    }
    grad
}
