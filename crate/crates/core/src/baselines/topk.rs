use nalgebra::DMatrix;

use super::DEFAULT_EPSILON;
use crate::codec::{index_bits, renormalize_rows};
use crate::error::{Error, Result};
use crate::labels::{Precision, SoftLabelMatrix};

/// The `k_top` largest entries of each row, highest first. Ties go to the
/// lower class id.
#[derive(Debug, Clone, PartialEq)]
pub struct TopkSelection {
    pub k_top: usize,
    /// `n x k_top` kept values.
    pub values: DMatrix<f64>,
    /// Row-major `n x k_top` class ids.
    pub classes: Vec<u32>,
}

pub fn select_topk(probs: &DMatrix<f64>, k_top: usize) -> Result<TopkSelection> {
    let (n, c) = probs.shape();
    if k_top == 0 || k_top > c {
        return Err(Error::param(format!("k_top = {k_top} must be in 1..={c}")));
    }
    let mut values = DMatrix::zeros(n, k_top);
    let mut classes = Vec::with_capacity(n * k_top);
    let mut order: Vec<usize> = Vec::with_capacity(c);
    for r in 0..n {
        order.clear();
        order.extend(0..c);
        order.sort_by(|&a, &b| probs[(r, b)].total_cmp(&probs[(r, a)]).then(a.cmp(&b)));
        for (s, &class) in order[..k_top].iter().enumerate() {
            values[(r, s)] = probs[(r, class)];
            classes.push(class as u32);
        }
    }
    Ok(TopkSelection {
        k_top,
        values,
        classes,
    })
}

/// Stored top-k labels: kept probabilities plus their class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TopkArchive {
    classes: usize,
    selection: TopkSelection,
    precision: Precision,
}

impl TopkArchive {
    pub fn new(classes: usize, selection: TopkSelection, precision: Precision) -> Result<Self> {
        let k = selection.k_top;
        let n = selection.values.nrows();
        if k == 0 || k > classes || selection.values.ncols() != k || selection.classes.len() != n * k
        {
            return Err(Error::dim(format!(
                "top-{k} selection of shape {:?} with {} ids over {classes} classes",
                selection.values.shape(),
                selection.classes.len()
            )));
        }
        for row in selection.classes.chunks_exact(k) {
            for (i, &a) in row.iter().enumerate() {
                if a as usize >= classes {
                    return Err(Error::IndexOutOfRange {
                        index: a as u64,
                        codes: classes as u64,
                    });
                }
                if row[..i].contains(&a) {
                    return Err(Error::Validation(format!("class {a} kept twice in one row")));
                }
            }
        }
        Ok(Self {
            classes,
            selection,
            precision,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn k_top(&self) -> usize {
        self.selection.k_top
    }

    pub fn rows(&self) -> usize {
        self.selection.values.nrows()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.selection.values
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.selection.classes
    }

    /// Bits per stored class id, `ceil(log2 c)`.
    pub fn index_bits(&self) -> u32 {
        index_bits(self.classes)
    }

    /// Copy whose values are exactly representable at the storage precision.
    pub fn rounded(&self) -> Self {
        let mut out = self.clone();
        out.selection.values = self.selection.values.map(|v| self.precision.round(v));
        out
    }
}

pub fn topk_compress(labels: &SoftLabelMatrix, k_top: usize) -> Result<TopkArchive> {
    let selection = select_topk(labels.as_matrix(), k_top)?;
    TopkArchive::new(labels.c(), selection, labels.precision())
}

/// Scatters the kept values back to their classes and renormalises.
pub fn topk_decompress(archive: &TopkArchive) -> Result<SoftLabelMatrix> {
    let k = archive.k_top();
    let mut full = DMatrix::zeros(archive.rows(), archive.classes);
    for r in 0..archive.rows() {
        for s in 0..k {
            let class = archive.selection.classes[r * k + s] as usize;
            full[(r, class)] = archive.selection.values[(r, s)];
        }
    }
    renormalize_rows(full, DEFAULT_EPSILON)
}
