use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::codec::renormalize_rows;
use crate::error::{Error, Result};
use crate::labels::SoftLabelMatrix;

/// Principal-component codec: each label is stored as its projection onto
/// the leading `k_pc` components of the centred label set.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaCodec {
    mean: DVector<f64>,
    /// `k_pc x c`, orthonormal rows, by decreasing explained variance.
    components: DMatrix<f64>,
}

impl PcaCodec {
    pub fn new(mean: DVector<f64>, components: DMatrix<f64>) -> Result<Self> {
        if components.ncols() != mean.len() || components.nrows() == 0 {
            return Err(Error::dim(format!(
                "components {:?} do not match mean of length {}",
                components.shape(),
                mean.len()
            )));
        }
        Ok(Self { mean, components })
    }

    /// Eigendecomposition of the label covariance.
    pub fn fit(labels: &SoftLabelMatrix, k_pc: usize) -> Result<Self> {
        let (n, c) = (labels.n(), labels.c());
        if k_pc == 0 || k_pc > n.min(c) {
            return Err(Error::param(format!(
                "k_pc = {k_pc} must be in 1..={}",
                n.min(c)
            )));
        }
        let data = labels.as_matrix();
        let mean = data.row_mean().transpose();
        let mut centered = data.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let scatter = centered.transpose() * &centered;
        let eigen = SymmetricEigen::new(scatter);
        let mut order: Vec<usize> = (0..c).collect();
        order.sort_by(|&a, &b| {
            eigen.eigenvalues[b]
                .total_cmp(&eigen.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let mut components = DMatrix::zeros(k_pc, c);
        for (i, &col) in order[..k_pc].iter().enumerate() {
            let v = eigen.eigenvectors.column(col);
            // fix the sign so the largest-magnitude entry is positive
            let pivot = v.iter().copied().fold(0.0f64, |acc, x| {
                if x.abs() > acc.abs() {
                    x
                } else {
                    acc
                }
            });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for j in 0..c {
                components[(i, j)] = sign * v[j];
            }
        }
        Self::new(mean, components)
    }

    pub fn num_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn classes(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// `n x k_pc` projections of the centred labels.
    pub fn compress(&self, labels: &SoftLabelMatrix) -> Result<DMatrix<f64>> {
        if labels.c() != self.classes() {
            return Err(Error::dim(format!(
                "labels have {} classes, codec expects {}",
                labels.c(),
                self.classes()
            )));
        }
        let mut centered = labels.as_matrix().clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * self.components.transpose())
    }

    /// `mean + projections * components`, before renormalisation.
    pub fn reconstruct_raw(&self, projections: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if projections.ncols() != self.num_components() {
            return Err(Error::dim(format!(
                "projections have {} columns, codec has {} components",
                projections.ncols(),
                self.num_components()
            )));
        }
        let mut out = projections * &self.components;
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(out)
    }

    pub fn decompress(&self, projections: &DMatrix<f64>, epsilon: f64) -> Result<SoftLabelMatrix> {
        renormalize_rows(self.reconstruct_raw(projections)?, epsilon)
    }
}
