use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::optim::AdamW;

/// One-hidden-layer ReLU perceptron producing class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

pub(crate) struct Activations {
    pre: DMatrix<f64>,
    hidden: DMatrix<f64>,
    pub logits: DMatrix<f64>,
}

fn he_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let bound = (6.0 / rows as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

fn add_row_bias(m: &mut DMatrix<f64>, bias: &DVector<f64>) {
    for (mut col, &b) in m.column_iter_mut().zip(bias.iter()) {
        col.add_scalar_mut(b);
    }
}

fn column_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

impl Mlp {
    pub fn new<R: Rng>(inputs: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        Self {
            w1: he_uniform(inputs, hidden, rng),
            b1: DVector::zeros(hidden),
            w2: he_uniform(hidden, classes, rng),
            b2: DVector::zeros(classes),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn classes(&self) -> usize {
        self.w2.ncols()
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.w2].iter().all(|m| m.iter().all(|v| v.is_finite()))
            && [&self.b1, &self.b2].iter().all(|v| v.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn forward_full(&self, x: &DMatrix<f64>) -> Activations {
        let mut pre = x * &self.w1;
        add_row_bias(&mut pre, &self.b1);
        let hidden = pre.map(|v| v.max(0.0));
        let mut logits = &hidden * &self.w2;
        add_row_bias(&mut logits, &self.b2);
        Activations { pre, hidden, logits }
    }

    pub fn logits(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_full(x).logits
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        let logits = self.logits(x);
        logits
            .row_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                    .0
            })
            .collect()
    }

    /// Backpropagates `grad_logits` and applies one optimizer step.
    pub(crate) fn apply_gradient(
        &mut self,
        x: &DMatrix<f64>,
        act: &Activations,
        grad_logits: &DMatrix<f64>,
        opt: &mut AdamW,
    ) -> Result<()> {
        let dw2 = act.hidden.transpose() * grad_logits;
        let db2 = column_sums(grad_logits);
        let mut dpre = grad_logits * self.w2.transpose();
        dpre.zip_apply(&act.pre, |g, p| {
            if p <= 0.0 {
                *g = 0.0
            }
        });
        let dw1 = x.transpose() * &dpre;
        let db1 = column_sums(&dpre);
        opt.step(&mut [
            (self.w1.as_mut_slice(), dw1.as_slice()),
            (self.b1.as_mut_slice(), db1.as_slice()),
            (self.w2.as_mut_slice(), dw2.as_slice()),
            (self.b2.as_mut_slice(), db2.as_slice()),
        ]);
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("network weights".into()))
        }
    }
}
