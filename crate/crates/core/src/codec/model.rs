use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::labels::{Precision, SoftLabelMatrix};

/// Linear encoder, shared segment codebook and linear decoder.
///
/// A label `y` (length `c`) is encoded as `h = y P`, split into
/// `m = d_h / d_c` contiguous segments, each segment is replaced by its
/// nearest codebook row, and the concatenation is decoded as `h_hat D`.
#[derive(Debug, Clone, PartialEq)]
pub struct VqaeModel {
    encoder: DMatrix<f64>,
    decoder: DMatrix<f64>,
    codebook: DMatrix<f64>,
}

impl VqaeModel {
    pub fn new(
        encoder: DMatrix<f64>,
        decoder: DMatrix<f64>,
        codebook: DMatrix<f64>,
    ) -> Result<Self> {
        let (c, d_h) = encoder.shape();
        let (k, d_c) = codebook.shape();
        if decoder.shape() != (d_h, c) {
            return Err(Error::dim(format!(
                "decoder is {:?}, encoder {c}x{d_h} needs {d_h}x{c}",
                decoder.shape()
            )));
        }
        if c == 0 || d_h == 0 || d_c == 0 || k == 0 {
            return Err(Error::param("model dimensions must be positive"));
        }
        if d_h % d_c != 0 {
            return Err(Error::param(format!(
                "latent dim {d_h} is not divisible by code dim {d_c}"
            )));
        }
        if u32::try_from(k).is_err() {
            return Err(Error::param(format!("{k} codes do not fit u32 indices")));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !(finite(&encoder) && finite(&decoder) && finite(&codebook)) {
            return Err(Error::Validation("model parameters must be finite".into()));
        }
        Ok(Self {
            encoder,
            decoder,
            codebook,
        })
    }

    pub fn classes(&self) -> usize {
        self.encoder.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.ncols()
    }

    pub fn code_dim(&self) -> usize {
        self.codebook.ncols()
    }

    pub fn num_codes(&self) -> usize {
        self.codebook.nrows()
    }

    /// Number of segments `m` per latent vector.
    pub fn segments(&self) -> usize {
        self.latent_dim() / self.code_dim()
    }

    /// `ceil(log2 k)`; exact when [`Self::is_bit_exact`].
    pub fn index_bits(&self) -> u32 {
        index_bits(self.num_codes())
    }

    pub fn is_bit_exact(&self) -> bool {
        self.num_codes().is_power_of_two()
    }

    pub fn encoder(&self) -> &DMatrix<f64> {
        &self.encoder
    }

    pub fn decoder(&self) -> &DMatrix<f64> {
        &self.decoder
    }

    pub fn codebook(&self) -> &DMatrix<f64> {
        &self.codebook
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&mut DMatrix<f64>, &mut DMatrix<f64>, &mut DMatrix<f64>) {
        (&mut self.encoder, &mut self.decoder, &mut self.codebook)
    }

    /// Copy with every parameter rounded through single precision.
    pub fn rounded_to_single(&self) -> Self {
        let round = |m: &DMatrix<f64>| m.map(|v| Precision::Single.round(v));
        Self {
            encoder: round(&self.encoder),
            decoder: round(&self.decoder),
            codebook: round(&self.codebook),
        }
    }

    pub fn encode(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.classes() {
            return Err(Error::dim(format!(
                "label has {} classes, encoder expects {}",
                y.len(),
                self.classes()
            )));
        }
        let d_h = self.latent_dim();
        let mut h = vec![0.0; d_h];
        for (j, &yj) in y.iter().enumerate() {
            if yj == 0.0 {
                continue;
            }
            for (t, ht) in h.iter_mut().enumerate() {
                *ht += yj * self.encoder[(j, t)];
            }
        }
        Ok(h)
    }

    pub(crate) fn encode_batch(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.ncols() != self.classes() {
            return Err(Error::dim(format!(
                "labels have {} classes, encoder expects {}",
                y.ncols(),
                self.classes()
            )));
        }
        Ok(y * &self.encoder)
    }

    /// Nearest codebook row to `segment` by squared Euclidean distance.
    /// Ties go to the lowest index.
    pub fn nearest_code(&self, segment: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for j in 0..self.num_codes() {
            let dist: f64 = segment
                .iter()
                .enumerate()
                .map(|(t, &v)| {
                    let d = v - self.codebook[(j, t)];
                    d * d
                })
                .sum();
            if dist < best.1 {
                best = (j, dist);
            }
        }
        best
    }

    /// Per-segment nearest codes and the concatenated quantized latent.
    pub fn quantize_latent(&self, h: &[f64]) -> Result<(Vec<u32>, Vec<f64>)> {
        if h.len() != self.latent_dim() {
            return Err(Error::dim(format!(
                "latent has {} entries, model expects {}",
                h.len(),
                self.latent_dim()
            )));
        }
        if let Some(v) = h.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("latent contains {v}")));
        }
        let d_c = self.code_dim();
        let mut indices = Vec::with_capacity(self.segments());
        let mut h_hat = Vec::with_capacity(h.len());
        for segment in h.chunks_exact(d_c) {
            let (q, _) = self.nearest_code(segment);
            indices.push(q as u32);
            h_hat.extend(self.codebook.row(q).iter());
        }
        Ok((indices, h_hat))
    }

    /// Concatenation of the selected codebook rows.
    pub fn lookup(&self, indices: &[u32]) -> Result<Vec<f64>> {
        if indices.len() != self.segments() {
            return Err(Error::dim(format!(
                "{} indices given, model has {} segments",
                indices.len(),
                self.segments()
            )));
        }
        let mut h_hat = Vec::with_capacity(self.latent_dim());
        for &q in indices {
            if q as usize >= self.num_codes() {
                return Err(Error::IndexOutOfRange {
                    index: q as u64,
                    codes: self.num_codes() as u64,
                });
            }
            h_hat.extend(self.codebook.row(q as usize).iter());
        }
        Ok(h_hat)
    }

    pub fn decode(&self, h_hat: &[f64]) -> Result<Vec<f64>> {
        if h_hat.len() != self.latent_dim() {
            return Err(Error::dim(format!(
                "quantized latent has {} entries, decoder expects {}",
                h_hat.len(),
                self.latent_dim()
            )));
        }
        let c = self.classes();
        let mut y = vec![0.0; c];
        for (t, &ht) in h_hat.iter().enumerate() {
            if ht == 0.0 {
                continue;
            }
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += ht * self.decoder[(t, j)];
            }
        }
        Ok(y)
    }

    pub fn compress(&self, labels: &SoftLabelMatrix) -> Result<CodeIndexMatrix> {
        self.compress_matrix(labels.as_matrix())
    }

    pub(crate) fn compress_matrix(&self, data: &DMatrix<f64>) -> Result<CodeIndexMatrix> {
        let latents = self.encode_batch(data)?;
        let m = self.segments();
        let mut codes = Vec::with_capacity(data.nrows() * m);
        let mut h = vec![0.0; self.latent_dim()];
        for r in 0..latents.nrows() {
            for (t, v) in h.iter_mut().enumerate() {
                *v = latents[(r, t)];
            }
            codes.extend(self.quantize_latent(&h)?.0);
        }
        CodeIndexMatrix::new(data.nrows(), m, self.num_codes(), codes)
    }

    /// Decoded rows before renormalisation.
    pub fn reconstruct_raw(&self, codes: &CodeIndexMatrix) -> Result<DMatrix<f64>> {
        self.check_codes(codes)?;
        let mut out = DMatrix::zeros(codes.rows(), self.classes());
        for r in 0..codes.rows() {
            let y_hat = self.decode(&self.lookup(codes.row(r))?)?;
            for (j, v) in y_hat.into_iter().enumerate() {
                out[(r, j)] = v;
            }
        }
        Ok(out)
    }

    pub fn decompress(&self, codes: &CodeIndexMatrix, epsilon: f64) -> Result<SoftLabelMatrix> {
        let raw = self.reconstruct_raw(codes)?;
        renormalize_rows(raw, epsilon)
    }

    fn check_codes(&self, codes: &CodeIndexMatrix) -> Result<()> {
        if codes.cols() != self.segments() {
            return Err(Error::dim(format!(
                "index matrix has {} columns, model has {} segments",
                codes.cols(),
                self.segments()
            )));
        }
        Ok(())
    }
}

pub fn index_bits(values: usize) -> u32 {
    if values <= 1 {
        0
    } else {
        usize::BITS - (values - 1).leading_zeros()
    }
}

/// `max(y_j, eps) / sum_l max(y_l, eps)`.
pub fn renormalize(y_hat: &[f64], epsilon: f64) -> Vec<f64> {
    let floored: Vec<f64> = y_hat.iter().map(|&v| v.max(epsilon)).collect();
    let total: f64 = floored.iter().sum();
    floored.into_iter().map(|v| v / total).collect()
}

pub(crate) fn renormalize_rows(mut raw: DMatrix<f64>, epsilon: f64) -> Result<SoftLabelMatrix> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
    }
    for mut row in raw.row_iter_mut() {
        let values: Vec<f64> = row.iter().copied().collect();
        for (dst, v) in row.iter_mut().zip(renormalize(&values, epsilon)) {
            *dst = v;
        }
    }
    SoftLabelMatrix::new(raw, Precision::default())
}

/// `n x m` code indices, each below the codebook size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeIndexMatrix {
    rows: usize,
    cols: usize,
    codes: usize,
    data: Vec<u32>,
}

impl CodeIndexMatrix {
    pub fn new(rows: usize, cols: usize, codes: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} indices for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(&bad) = data.iter().find(|&&q| q as usize >= codes) {
            return Err(Error::IndexOutOfRange {
                index: bad as u64,
                codes: codes as u64,
            });
        }
        Ok(Self {
            rows,
            cols,
            codes,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Exclusive upper bound on every index.
    pub fn codes(&self) -> usize {
        self.codes
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.data
    }
}
