//! Bit-exact on-disk formats: packed code indices, the `SLAR` archive
//! container and the `SLVQ` model file.
//!
//! All multi-byte fields are little-endian. Matrices are written row-major.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{
    topk_decompress, PcaCodec, ScalarQuantCodec, TopkArchive, TopkSelection, VqNoAeCodec,
    DEFAULT_EPSILON,
};
use crate::codec::{index_bits, CodeIndexMatrix, GradientMode, TopkVqCodec, TopkVqCodes, VqaeModel};
use crate::error::{Error, Result};
use crate::labels::{Precision, SoftLabelMatrix};
use crate::wire::{ReadLe, WriteLe};

pub const ARCHIVE_MAGIC: &[u8; 4] = b"SLAR";
pub const ARCHIVE_VERSION: u16 = 1;
pub const MODEL_MAGIC: &[u8; 4] = b"SLVQ";
pub const MODEL_VERSION: u16 = 1;

/// Bytes per packed row of `cols` fields of `bits` bits.
pub fn packed_row_bytes(cols: usize, bits: u32) -> usize {
    (cols * bits as usize).div_ceil(8)
}

/// Packs indices MSB-first, `bits` per field, padding every row to a byte
/// boundary so rows can be addressed independently.
pub fn pack_indices(codes: &CodeIndexMatrix, bits: u32) -> Result<Vec<u8>> {
    if bits > 32 {
        return Err(Error::param(format!("at most 32 bits per index, got {bits}")));
    }
    let limit = 1u64 << bits;
    let row_bytes = packed_row_bytes(codes.cols(), bits);
    let mut out = Vec::with_capacity(row_bytes * codes.rows());
    for r in 0..codes.rows() {
        let mut acc: u64 = 0;
        let mut filled = 0u32;
        for &q in codes.row(r) {
            if q as u64 >= limit {
                return Err(Error::IndexOutOfRange {
                    index: q as u64,
                    codes: limit,
                });
            }
            acc = (acc << bits) | q as u64;
            filled += bits;
            while filled >= 8 {
                filled -= 8;
                out.push((acc >> filled) as u8);
            }
            acc &= (1u64 << filled) - 1;
        }
        if filled > 0 {
            out.push((acc << (8 - filled)) as u8);
        }
    }
    Ok(out)
}

/// Inverse of [`pack_indices`]. The result's bound is `2^bits`.
pub fn unpack_indices(bytes: &[u8], rows: usize, cols: usize, bits: u32) -> Result<CodeIndexMatrix> {
    if bits > 32 {
        return Err(Error::param(format!("at most 32 bits per index, got {bits}")));
    }
    let row_bytes = packed_row_bytes(cols, bits);
    if bytes.len() != row_bytes * rows {
        return Err(Error::format(format!(
            "packed indices hold {} bytes, {rows} rows of {row_bytes} need {}",
            bytes.len(),
            row_bytes * rows
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for row in bytes.chunks(row_bytes.max(1)).take(rows) {
        let mut acc: u64 = 0;
        let mut filled = 0u32;
        let mut next = row.iter();
        for _ in 0..cols {
            while filled < bits {
                acc = (acc << 8) | *next.next().expect("row length checked") as u64;
                filled += 8;
            }
            filled -= bits;
            data.push(((acc >> filled) & ((1u64 << bits) - 1)) as u32);
            acc &= (1u64 << filled) - 1;
        }
    }
    if row_bytes == 0 {
        data.resize(rows * cols, 0);
    }
    CodeIndexMatrix::new(rows, cols, 1usize << bits, data)
}

/// Codec identifiers stored in the archive header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecId {
    Vqae = 0,
    Topk = 1,
    Quant = 2,
    Pca = 3,
    VqNoAe = 4,
    TopkVq = 5,
}

impl CodecId {
    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0 => CodecId::Vqae,
            1 => CodecId::Topk,
            2 => CodecId::Quant,
            3 => CodecId::Pca,
            4 => CodecId::VqNoAe,
            5 => CodecId::TopkVq,
            other => return Err(Error::format(format!("unknown codec id {other}"))),
        })
    }
}

/// The stored half of an autoencoder: codebook and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct VqDecoder {
    model: VqaeModel,
    epsilon: f64,
}

impl VqDecoder {
    /// Keeps the decoder and codebook, rounded to single precision.
    pub fn from_model(model: &VqaeModel, epsilon: f64) -> Result<Self> {
        Self::new(model.decoder().clone(), model.codebook().clone(), epsilon)
    }

    pub fn new(decoder: DMatrix<f64>, codebook: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        let round = |m: DMatrix<f64>| m.map(|v| Precision::Single.round(v));
        let (d_h, c) = decoder.shape();
        // the encoder is never stored; a zero placeholder keeps the shapes valid
        let model = VqaeModel::new(DMatrix::zeros(c, d_h), round(decoder), round(codebook))?;
        Ok(Self { model, epsilon })
    }

    pub fn decoder(&self) -> &DMatrix<f64> {
        self.model.decoder()
    }

    pub fn codebook(&self) -> &DMatrix<f64> {
        self.model.codebook()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn classes(&self) -> usize {
        self.model.classes()
    }

    pub fn segments(&self) -> usize {
        self.model.segments()
    }

    pub fn decompress(&self, codes: &CodeIndexMatrix) -> Result<SoftLabelMatrix> {
        self.model.decompress(codes, self.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Vqae {
        decoder: VqDecoder,
        codes: CodeIndexMatrix,
    },
    Topk(TopkArchive),
    Quant {
        classes: usize,
        codec: ScalarQuantCodec,
        codes: CodeIndexMatrix,
    },
    Pca {
        codec: PcaCodec,
        projections: DMatrix<f64>,
    },
    VqNoAe {
        codec: VqNoAeCodec,
        codes: CodeIndexMatrix,
    },
    TopkVq {
        classes: usize,
        decoder: VqDecoder,
        stored: TopkVqCodes,
    },
}

/// A compressed label set together with everything needed to decode it.
///
/// Constructors round stored floats to their on-disk precision, so
/// `read(write(a)) == a` holds field by field.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedArchive {
    payload: Payload,
}

fn round_matrix(m: &DMatrix<f64>, p: Precision) -> DMatrix<f64> {
    m.map(|v| p.round(v))
}

impl CompressedArchive {
    pub fn vqae(model: &VqaeModel, epsilon: f64, codes: CodeIndexMatrix) -> Result<Self> {
        let decoder = VqDecoder::from_model(model, epsilon)?;
        check_codes(&codes, decoder.segments(), model.num_codes())?;
        Ok(Self {
            payload: Payload::Vqae { decoder, codes },
        })
    }

    pub fn topk(archive: &TopkArchive) -> Self {
        Self {
            payload: Payload::Topk(archive.rounded()),
        }
    }

    pub fn quant(classes: usize, codec: &ScalarQuantCodec, codes: CodeIndexMatrix) -> Result<Self> {
        let levels = codec.levels().iter().map(|&v| Precision::Half.round(v)).collect();
        let codec = ScalarQuantCodec::from_levels(levels)?;
        check_codes(&codes, classes, codec.levels().len())?;
        Ok(Self {
            payload: Payload::Quant {
                classes,
                codec,
                codes,
            },
        })
    }

    pub fn pca(codec: &PcaCodec, projections: &DMatrix<f64>) -> Result<Self> {
        if projections.ncols() != codec.num_components() {
            return Err(Error::dim("projection width differs from component count"));
        }
        let half = Precision::Half;
        let codec = PcaCodec::new(
            codec.mean().map(|v| half.round(v)),
            round_matrix(codec.components(), half),
        )?;
        Ok(Self {
            payload: Payload::Pca {
                codec,
                projections: round_matrix(projections, half),
            },
        })
    }

    pub fn vq_no_ae(codec: &VqNoAeCodec, codes: CodeIndexMatrix) -> Result<Self> {
        let model = codec.model();
        let codec = VqNoAeCodec::from_codebook(
            model.classes(),
            round_matrix(model.codebook(), Precision::Single),
            codec.epsilon(),
        )?;
        check_codes(&codes, codec.model().segments(), codec.model().num_codes())?;
        Ok(Self {
            payload: Payload::VqNoAe { codec, codes },
        })
    }

    pub fn topk_vq(codec: &TopkVqCodec, stored: TopkVqCodes) -> Result<Self> {
        let decoder = VqDecoder::from_model(codec.model(), codec.epsilon())?;
        check_codes(&stored.codes, decoder.segments(), codec.model().num_codes())?;
        if stored.classes.len() != stored.codes.rows() * codec.k_top() {
            return Err(Error::dim("class id count does not match rows"));
        }
        Ok(Self {
            payload: Payload::TopkVq {
                classes: codec.classes(),
                decoder,
                stored,
            },
        })
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn codec_id(&self) -> CodecId {
        match self.payload {
            Payload::Vqae { .. } => CodecId::Vqae,
            Payload::Topk(_) => CodecId::Topk,
            Payload::Quant { .. } => CodecId::Quant,
            Payload::Pca { .. } => CodecId::Pca,
            Payload::VqNoAe { .. } => CodecId::VqNoAe,
            Payload::TopkVq { .. } => CodecId::TopkVq,
        }
    }

    pub fn rows(&self) -> usize {
        match &self.payload {
            Payload::Vqae { codes, .. }
            | Payload::Quant { codes, .. }
            | Payload::VqNoAe { codes, .. } => codes.rows(),
            Payload::Topk(a) => a.rows(),
            Payload::Pca { projections, .. } => projections.nrows(),
            Payload::TopkVq { stored, .. } => stored.codes.rows(),
        }
    }

    pub fn classes(&self) -> usize {
        match &self.payload {
            Payload::Vqae { decoder, .. } => decoder.classes(),
            Payload::Topk(a) => a.classes(),
            Payload::Quant { classes, .. } | Payload::TopkVq { classes, .. } => *classes,
            Payload::Pca { codec, .. } => codec.classes(),
            Payload::VqNoAe { codec, .. } => codec.model().classes(),
        }
    }

    pub fn decompress(&self) -> Result<SoftLabelMatrix> {
        match &self.payload {
            Payload::Vqae { decoder, codes } => decoder.decompress(codes),
            Payload::Topk(a) => topk_decompress(a),
            Payload::Quant { codec, codes, .. } => codec.invert(codes, DEFAULT_EPSILON),
            Payload::Pca { codec, projections } => codec.decompress(projections, DEFAULT_EPSILON),
            Payload::VqNoAe { codec, codes } => codec.decompress(codes),
            Payload::TopkVq {
                classes,
                decoder,
                stored,
            } => {
                let k_top = decoder.classes();
                let codec = TopkVqCodec::from_parts(
                    *classes,
                    k_top,
                    VqaeModel::new(
                        DMatrix::zeros(k_top, decoder.decoder().nrows()),
                        decoder.decoder().clone(),
                        decoder.codebook().clone(),
                    )?,
                    decoder.epsilon(),
                )?;
                codec.decompress(stored)
            }
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        buf.write_all(ARCHIVE_MAGIC)?;
        buf.put_u16(ARCHIVE_VERSION)?;
        buf.put_u8(self.codec_id() as u8)?;
        match &self.payload {
            Payload::Vqae { decoder, codes } => {
                put_dims(&mut buf, &[decoder.classes(), decoder.decoder().nrows()])?;
                put_dims(&mut buf, &[decoder.codebook().ncols(), decoder.codebook().nrows()])?;
                buf.put_u64(codes.rows() as u64)?;
                buf.put_f64(decoder.epsilon())?;
                put_matrix(&mut buf, decoder.codebook(), Precision::Single)?;
                put_matrix(&mut buf, decoder.decoder(), Precision::Single)?;
                buf.extend(pack_indices(codes, index_bits(codes.codes()))?);
            }
            Payload::Topk(a) => {
                put_dims(&mut buf, &[a.classes(), a.k_top()])?;
                buf.put_u64(a.rows() as u64)?;
                buf.put_u8(a.precision().tag())?;
                put_matrix(&mut buf, a.values(), a.precision())?;
                let ids = CodeIndexMatrix::new(a.rows(), a.k_top(), a.classes(), a.class_ids().to_vec())?;
                buf.extend(pack_indices(&ids, a.index_bits())?);
            }
            Payload::Quant {
                classes,
                codec,
                codes,
            } => {
                put_dims(&mut buf, &[*classes])?;
                buf.put_u8(codec.bits() as u8)?;
                buf.put_u64(codes.rows() as u64)?;
                for &level in codec.levels() {
                    buf.put_f16(level)?;
                }
                buf.extend(pack_indices(codes, codec.bits())?);
            }
            Payload::Pca { codec, projections } => {
                put_dims(&mut buf, &[codec.classes(), codec.num_components()])?;
                buf.put_u64(projections.nrows() as u64)?;
                for &v in codec.mean().iter() {
                    buf.put_f16(v)?;
                }
                put_matrix(&mut buf, codec.components(), Precision::Half)?;
                put_matrix(&mut buf, projections, Precision::Half)?;
            }
            Payload::VqNoAe { codec, codes } => {
                let model = codec.model();
                put_dims(&mut buf, &[model.classes(), model.code_dim(), model.num_codes()])?;
                buf.put_u64(codes.rows() as u64)?;
                buf.put_f64(codec.epsilon())?;
                put_matrix(&mut buf, model.codebook(), Precision::Single)?;
                buf.extend(pack_indices(codes, index_bits(codes.codes()))?);
            }
            Payload::TopkVq {
                classes,
                decoder,
                stored,
            } => {
                let k_top = decoder.classes();
                put_dims(&mut buf, &[*classes, k_top, decoder.decoder().nrows()])?;
                put_dims(&mut buf, &[decoder.codebook().ncols(), decoder.codebook().nrows()])?;
                buf.put_u64(stored.codes.rows() as u64)?;
                buf.put_f64(decoder.epsilon())?;
                put_matrix(&mut buf, decoder.codebook(), Precision::Single)?;
                put_matrix(&mut buf, decoder.decoder(), Precision::Single)?;
                buf.extend(pack_indices(&stored.codes, index_bits(stored.codes.codes()))?);
                let ids = CodeIndexMatrix::new(stored.codes.rows(), k_top, *classes, stored.classes.clone())?;
                buf.extend(pack_indices(&ids, index_bits(*classes))?);
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.put_u32(crc)?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + 2 + 1 + 4 {
            return Err(Error::format("archive is too short"));
        }
        if &bytes[..4] != ARCHIVE_MAGIC {
            return Err(Error::format(format!("bad archive magic {:?}", &bytes[..4])));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = &body[4..];
        let version = r.get_u16()?;
        if version != ARCHIVE_VERSION {
            return Err(Error::format(format!("unsupported archive version {version}")));
        }
        let payload = match CodecId::from_byte(r.get_u8()?)? {
            CodecId::Vqae => {
                let (c, d_h, d_c, k) = (get_dim(&mut r)?, get_dim(&mut r)?, get_dim(&mut r)?, get_dim(&mut r)?);
                let n = get_rows(&mut r)?;
                let epsilon = r.get_f64()?;
                let codebook = get_matrix(&mut r, k, d_c, Precision::Single)?;
                let decoder_m = get_matrix(&mut r, d_h, c, Precision::Single)?;
                let decoder = VqDecoder::new(decoder_m, codebook, epsilon)?;
                let codes = get_codes(&mut r, n, decoder.segments(), k)?;
                Payload::Vqae { decoder, codes }
            }
            CodecId::Topk => {
                let (c, k_top) = (get_dim(&mut r)?, get_dim(&mut r)?);
                let n = get_rows(&mut r)?;
                let precision = Precision::from_tag(r.get_u8()?)?;
                let values = get_matrix(&mut r, n, k_top, precision)?;
                let ids = get_codes(&mut r, n, k_top, c)?;
                Payload::Topk(TopkArchive::new(
                    c,
                    TopkSelection {
                        k_top,
                        values,
                        classes: ids.as_slice().to_vec(),
                    },
                    precision,
                )?)
            }
            CodecId::Quant => {
                let classes = get_dim(&mut r)?;
                let bits = r.get_u8()? as u32;
                let n = get_rows(&mut r)?;
                if !(1..=8).contains(&bits) {
                    return Err(Error::format(format!("quantizer with {bits} bits")));
                }
                let levels = (0..1usize << bits)
                    .map(|_| r.get_f16())
                    .collect::<std::io::Result<Vec<f64>>>()?;
                let codec = ScalarQuantCodec::from_levels(levels)?;
                let codes = get_codes(&mut r, n, classes, 1 << bits)?;
                Payload::Quant {
                    classes,
                    codec,
                    codes,
                }
            }
            CodecId::Pca => {
                let (c, k_pc) = (get_dim(&mut r)?, get_dim(&mut r)?);
                let n = get_rows(&mut r)?;
                let mean = (0..c)
                    .map(|_| r.get_f16())
                    .collect::<std::io::Result<Vec<f64>>>()?;
                let components = get_matrix(&mut r, k_pc, c, Precision::Half)?;
                let projections = get_matrix(&mut r, n, k_pc, Precision::Half)?;
                Payload::Pca {
                    codec: PcaCodec::new(DVector::from_vec(mean), components)?,
                    projections,
                }
            }
            CodecId::VqNoAe => {
                let (c, d_c, k) = (get_dim(&mut r)?, get_dim(&mut r)?, get_dim(&mut r)?);
                let n = get_rows(&mut r)?;
                let epsilon = r.get_f64()?;
                let codebook = get_matrix(&mut r, k, d_c, Precision::Single)?;
                let codec = VqNoAeCodec::from_codebook(c, codebook, epsilon)?;
                let codes = get_codes(&mut r, n, codec.model().segments(), k)?;
                Payload::VqNoAe { codec, codes }
            }
            CodecId::TopkVq => {
                let (c, k_top, d_h) = (get_dim(&mut r)?, get_dim(&mut r)?, get_dim(&mut r)?);
                let (d_c, k) = (get_dim(&mut r)?, get_dim(&mut r)?);
                let n = get_rows(&mut r)?;
                let epsilon = r.get_f64()?;
                let codebook = get_matrix(&mut r, k, d_c, Precision::Single)?;
                let decoder_m = get_matrix(&mut r, d_h, k_top, Precision::Single)?;
                let decoder = VqDecoder::new(decoder_m, codebook, epsilon)?;
                let codes = get_codes(&mut r, n, decoder.segments(), k)?;
                let ids = get_codes(&mut r, n, k_top, c)?;
                Payload::TopkVq {
                    classes: c,
                    decoder,
                    stored: TopkVqCodes {
                        codes,
                        classes: ids.as_slice().to_vec(),
                    },
                }
            }
        };
        if !r.is_empty() {
            return Err(Error::format(format!("{} trailing bytes before checksum", r.len())));
        }
        Ok(Self { payload })
    }
}

fn check_codes(codes: &CodeIndexMatrix, cols: usize, bound: usize) -> Result<()> {
    if codes.cols() != cols || codes.codes() > bound {
        return Err(Error::dim(format!(
            "index matrix {}x{} (bound {}) does not fit {cols} fields below {bound}",
            codes.rows(),
            codes.cols(),
            codes.codes()
        )));
    }
    Ok(())
}

fn put_dims(buf: &mut Vec<u8>, dims: &[usize]) -> Result<()> {
    for &d in dims {
        let v = u32::try_from(d).map_err(|_| Error::format(format!("dimension {d} exceeds u32")))?;
        buf.put_u32(v)?;
    }
    Ok(())
}

fn get_dim(r: &mut &[u8]) -> Result<usize> {
    Ok(r.get_u32()? as usize)
}

fn get_rows(r: &mut &[u8]) -> Result<usize> {
    usize::try_from(r.get_u64()?).map_err(|_| Error::format("row count exceeds usize"))
}

fn put_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>, p: Precision) -> Result<()> {
    for row in m.row_iter() {
        for &v in row.iter() {
            match p {
                Precision::Half => w.put_f16(v)?,
                Precision::Single => w.put_f32(v)?,
            }
        }
    }
    Ok(())
}

fn get_matrix<R: Read>(r: &mut R, rows: usize, cols: usize, p: Precision) -> Result<DMatrix<f64>> {
    let mut values = Vec::with_capacity(rows.saturating_mul(cols).min(1 << 24));
    for _ in 0..rows * cols {
        values.push(match p {
            Precision::Half => r.get_f16()?,
            Precision::Single => r.get_f32()?,
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

fn get_codes(r: &mut &[u8], rows: usize, cols: usize, bound: usize) -> Result<CodeIndexMatrix> {
    let bits = index_bits(bound);
    let len = packed_row_bytes(cols, bits)
        .checked_mul(rows)
        .filter(|&len| len <= r.len())
        .ok_or_else(|| Error::format("packed indices are truncated"))?;
    let (packed, rest) = r.split_at(len);
    *r = rest;
    let wide = unpack_indices(packed, rows, cols, bits)?;
    CodeIndexMatrix::new(rows, cols, bound, wide.as_slice().to_vec())
}

pub fn write_archive(archive: &CompressedArchive, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, archive.to_bytes()?)?;
    Ok(())
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<CompressedArchive> {
    CompressedArchive::from_bytes(&fs::read(path)?)
}

/// Settings stored next to the model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub gradient_mode: GradientMode,
    pub epsilon: f64,
}

impl Default for ModelMeta {
    fn default() -> Self {
        Self {
            gradient_mode: GradientMode::StraightThrough,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// `SLVQ` model file: header, then encoder, decoder and codebook as
/// single precision.
pub fn write_model<W: Write>(model: &VqaeModel, meta: &ModelMeta, mut w: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.write_all(MODEL_MAGIC)?;
    buf.put_u16(MODEL_VERSION)?;
    put_dims(
        &mut buf,
        &[model.classes(), model.latent_dim(), model.code_dim(), model.num_codes()],
    )?;
    buf.put_u8(meta.gradient_mode.tag())?;
    buf.put_f64(meta.epsilon)?;
    put_matrix(&mut buf, model.encoder(), Precision::Single)?;
    put_matrix(&mut buf, model.decoder(), Precision::Single)?;
    put_matrix(&mut buf, model.codebook(), Precision::Single)?;
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<(VqaeModel, ModelMeta)> {
    let magic: [u8; 4] = r.get_array()?;
    if &magic != MODEL_MAGIC {
        return Err(Error::format(format!("bad model magic {magic:?}")));
    }
    let version = r.get_u16()?;
    if version != MODEL_VERSION {
        return Err(Error::format(format!("unsupported model version {version}")));
    }
    let dims: Vec<usize> = (0..4)
        .map(|_| r.get_u32().map(|v| v as usize))
        .collect::<std::io::Result<_>>()?;
    let (c, d_h, d_c, k) = (dims[0], dims[1], dims[2], dims[3]);
    let gradient_mode = GradientMode::from_tag(r.get_u8()?)?;
    let epsilon = r.get_f64()?;
    let encoder = get_matrix(&mut r, c, d_h, Precision::Single)?;
    let decoder = get_matrix(&mut r, d_h, c, Precision::Single)?;
    let codebook = get_matrix(&mut r, k, d_c, Precision::Single)?;
    let model = VqaeModel::new(encoder, decoder, codebook)?;
    Ok((
        model,
        ModelMeta {
            gradient_mode,
            epsilon,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_bit_rows_pad_to_bytes() {
        assert_eq!(packed_row_bytes(159, 10), 199);
        let codes = CodeIndexMatrix::new(2, 159, 1024, (0..318).map(|i| (i * 7) % 1024).collect()).unwrap();
        let packed = pack_indices(&codes, 10).unwrap();
        assert_eq!(packed.len(), 2 * 199);
        let back = unpack_indices(&packed, 2, 159, 10).unwrap();
        assert_eq!(back.as_slice(), codes.as_slice());
    }

    #[test]
    fn eight_bits_is_the_byte_layout() {
        let codes = CodeIndexMatrix::new(2, 3, 256, vec![1, 2, 255, 0, 128, 7]).unwrap();
        assert_eq!(pack_indices(&codes, 8).unwrap(), vec![1, 2, 255, 0, 128, 7]);
    }

    #[test]
    fn msb_first_layout() {
        // 3-bit fields 5, 3, 7 -> 101 011 11|1 0000000
        let codes = CodeIndexMatrix::new(1, 3, 8, vec![5, 3, 7]).unwrap();
        assert_eq!(pack_indices(&codes, 3).unwrap(), vec![0b1010_1111, 0b1000_0000]);
    }

    #[test]
    fn pack_rejects_overflow_and_unpack_truncation() {
        let codes = CodeIndexMatrix::new(1, 1, 16, vec![9]).unwrap();
        assert!(matches!(pack_indices(&codes, 3), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(unpack_indices(&[0u8; 3], 2, 2, 8), Err(Error::Format(_))));
    }

    #[test]
    fn zero_bit_indices() {
        let codes = CodeIndexMatrix::new(3, 4, 1, vec![0; 12]).unwrap();
        let packed = pack_indices(&codes, 0).unwrap();
        assert!(packed.is_empty());
        assert_eq!(unpack_indices(&packed, 3, 4, 0).unwrap().as_slice(), &[0; 12]);
    }

    #[test]
    fn thirty_two_bit_indices() {
        let codes = CodeIndexMatrix::new(1, 2, usize::MAX, vec![u32::MAX, 1]).unwrap();
        let packed = pack_indices(&codes, 32).unwrap();
        assert_eq!(unpack_indices(&packed, 1, 2, 32).unwrap().as_slice(), &[u32::MAX, 1]);
    }
}
