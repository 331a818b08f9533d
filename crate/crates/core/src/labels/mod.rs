//! Soft-label and logit matrices.
//!
//! All arithmetic is carried out in `f64`. The [`Precision`] tag only records
//! how the labels are assumed to be stored on disk, which matters for storage
//! accounting and for the SLAB file format.

mod io;

pub use io::{read_csv, read_slab, write_slab, SLAB_MAGIC, SLAB_VERSION};

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums accepted by [`SoftLabelMatrix`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Half,
    Single,
}

impl Precision {
    pub fn bytes(self) -> usize {
        match self {
            Precision::Half => 2,
            Precision::Single => 4,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Precision::Half => 0,
            Precision::Single => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Precision::Half),
            1 => Ok(Precision::Single),
            other => Err(Error::format(format!("unknown precision tag {other}"))),
        }
    }

    /// Rounds `value` through the storage type.
    pub fn round(self, value: f64) -> f64 {
        match self {
            Precision::Half => half::f16::from_f64(value).to_f64(),
            Precision::Single => value as f32 as f64,
        }
    }
}

/// First problem found by [`validate_simplex`].
#[derive(Debug, Clone, PartialEq)]
pub enum SimplexViolation {
    NonFinite { row: usize, col: usize, value: f64 },
    Negative { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    Shape { rows: usize, cols: usize },
}

impl fmt::Display for SimplexViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SimplexViolation::NonFinite { row, col, value } => {
                write!(f, "row {row}, class {col}: non-finite value {value}")
            }
            SimplexViolation::Negative { row, col, value } => {
                write!(f, "row {row}, class {col}: negative probability {value:e}")
            }
            SimplexViolation::RowSum { row, sum } => {
                write!(f, "row {row}: sums to {sum} (off by {:e})", sum - 1.0)
            }
            SimplexViolation::Shape { rows, cols } => {
                write!(f, "shape {rows}x{cols}: need at least 2 classes")
            }
        }
    }
}

/// Checks that every row of `data` is a probability vector.
///
/// Reports the first violation in row-major order. Entries must be finite
/// and non-negative and each row must sum to one within [`SIMPLEX_TOLERANCE`].
pub fn validate_simplex(data: &DMatrix<f64>) -> Result<(), SimplexViolation> {
    let (rows, cols) = data.shape();
    if cols < 2 {
        return Err(SimplexViolation::Shape { rows, cols });
    }
    for row in 0..rows {
        let mut sum = 0.0;
        for col in 0..cols {
            let value = data[(row, col)];
            if !value.is_finite() {
                return Err(SimplexViolation::NonFinite { row, col, value });
            }
            if value < 0.0 {
                return Err(SimplexViolation::Negative { row, col, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(SimplexViolation::RowSum { row, sum });
        }
    }
    Ok(())
}

/// `n` probability vectors over `c` classes.
///
/// An empty matrix (`n == 0`) is allowed so that empty archives round-trip;
/// every constructor that takes data validates it.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelMatrix {
    data: DMatrix<f64>,
    precision: Precision,
}

impl SoftLabelMatrix {
    pub fn new(data: DMatrix<f64>, precision: Precision) -> Result<Self> {
        validate_simplex(&data).map_err(|v| Error::Validation(v.to_string()))?;
        Ok(Self { data, precision })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::dim("rows have different lengths"));
        }
        let data = DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]);
        Self::new(data, Precision::default())
    }

    pub fn empty(classes: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(0, classes), Precision::default())
    }

    pub(crate) fn from_valid(data: DMatrix<f64>, precision: Precision) -> Self {
        debug_assert!(validate_simplex(&data).is_ok());
        Self { data, precision }
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn c(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.n()).map(|i| self.row(i))
    }

    /// Rows `indices[0], indices[1], ...` as a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            data: self.data.select_rows(indices),
            precision: self.precision,
        }
    }

    /// Mean over rows of KL(self_i || other_i), in nats.
    pub fn mean_kl(&self, other: &SoftLabelMatrix) -> Result<f64> {
        if self.data.shape() != other.data.shape() {
            return Err(Error::dim(format!(
                "{:?} vs {:?}",
                self.data.shape(),
                other.data.shape()
            )));
        }
        if self.is_empty() {
            return Ok(0.0);
        }
        let total: f64 = (0..self.n())
            .map(|i| kl_divergence(self.data.row(i).iter(), other.data.row(i).iter()))
            .sum();
        Ok(total / self.n() as f64)
    }

    /// Mean Shannon entropy of the rows, in nats.
    pub fn mean_entropy(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .data
            .row_iter()
            .map(|row| row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>())
            .sum();
        total / self.n() as f64
    }
}

/// KL(p || q) with the convention 0 ln 0 = 0. Infinite when q has a zero
/// where p does not.
pub fn kl_divergence<'a>(
    p: impl IntoIterator<Item = &'a f64>,
    q: impl IntoIterator<Item = &'a f64>,
) -> f64 {
    p.into_iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// Raw teacher logits and the temperature used to soften them.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    data: DMatrix<f64>,
    temperature: f64,
}

impl LogitMatrix {
    pub fn new(data: DMatrix<f64>, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Validation(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        if data.ncols() < 2 {
            return Err(Error::Validation("need at least 2 classes".into()));
        }
        if let Some((idx, v)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (row, col) = (idx % data.nrows(), idx / data.nrows());
            return Err(Error::Validation(format!(
                "non-finite logit {v} at row {row}, class {col}"
            )));
        }
        Ok(Self { data, temperature })
    }

    pub fn from_rows(rows: &[Vec<f64>], temperature: f64) -> Result<Self> {
        let c = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != c) {
            return Err(Error::dim("rows have different lengths"));
        }
        Self::new(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]), temperature)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn c(&self) -> usize {
        self.data.ncols()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// Row-wise `softmax(z / tau)`, stabilised by subtracting the row maximum.
pub fn softmax_labels(logits: &LogitMatrix) -> SoftLabelMatrix {
    let mut out = logits.data.clone();
    for mut row in out.row_iter_mut() {
        softmax_in_place(row.iter_mut(), logits.temperature);
    }
    SoftLabelMatrix::from_valid(out, Precision::default())
}

pub(crate) fn softmax_in_place<'a>(values: impl Iterator<Item = &'a mut f64>, temperature: f64) {
    let mut values: Vec<&mut f64> = values.collect();
    let max = values.iter().map(|v| **v).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        **v = ((**v - max) / temperature).exp();
        sum += **v;
    }
    for v in values.iter_mut() {
        **v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logits(rows: &[Vec<f64>], tau: f64) -> LogitMatrix {
        LogitMatrix::from_rows(rows, tau).unwrap()
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let y = softmax_labels(&logits(&[vec![0.0, 0.0, 0.0]], 1.0));
        for p in y.row(0) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_ln2() {
        let y = softmax_labels(&logits(&[vec![2f64.ln(), 0.0]], 1.0));
        assert!((y.row(0)[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((y.row(0)[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_high_temperature_is_near_uniform() {
        let y = softmax_labels(&logits(&[vec![10.0, 0.0]], 1e6));
        for p in y.row(0) {
            assert!((p - 0.5).abs() < 1e-5);
        }
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let y = softmax_labels(&logits(&[vec![1e300, 0.0, -1e300]], 1.0));
        assert_eq!(y.row(0), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn logits_reject_bad_temperature_and_nan() {
        assert!(LogitMatrix::from_rows(&[vec![0.0, 1.0]], 0.0).is_err());
        assert!(LogitMatrix::from_rows(&[vec![0.0, 1.0]], f64::NAN).is_err());
        assert!(LogitMatrix::from_rows(&[vec![f64::NAN, 1.0]], 1.0).is_err());
        assert!(LogitMatrix::from_rows(&[vec![f64::INFINITY, 1.0]], 1.0).is_err());
    }

    #[test]
    fn validate_reports_row_sum() {
        let data = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.51, 0.5]);
        match validate_simplex(&data) {
            Err(SimplexViolation::RowSum { row, sum }) => {
                assert_eq!(row, 1);
                assert!((sum - 1.01).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_reports_negative_entry() {
        let data = DMatrix::from_row_slice(1, 3, &[0.5, 0.501, -1e-3]);
        assert_eq!(
            validate_simplex(&data),
            Err(SimplexViolation::Negative { row: 0, col: 2, value: -1e-3 })
        );
    }

    #[test]
    fn validate_accepts_valid_rows() {
        let data = DMatrix::from_row_slice(2, 3, &[0.2, 0.3, 0.5, 1.0, 0.0, 0.0]);
        assert_eq!(validate_simplex(&data), Ok(()));
    }

    #[test]
    fn label_matrix_requires_two_classes() {
        assert!(SoftLabelMatrix::from_rows(&[vec![1.0]]).is_err());
    }

    #[test]
    fn kl_of_identical_rows_is_zero() {
        let y = SoftLabelMatrix::from_rows(&[vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
        assert_eq!(y.mean_kl(&y).unwrap(), 0.0);
    }

    #[test]
    fn precision_rounding() {
        assert_eq!(Precision::Single.round(0.1), 0.1f32 as f64);
        assert_eq!(Precision::Half.round(0.5), 0.5);
        assert_ne!(Precision::Half.round(0.3), 0.3);
    }
}
