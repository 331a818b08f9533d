use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::{Precision, SoftLabelMatrix};
use crate::error::{Error, Result};
use crate::wire::{ReadLe, WriteLe};

pub const SLAB_MAGIC: &[u8; 4] = b"SLAB";
pub const SLAB_VERSION: u16 = 1;

// Half precision keeps about three decimal digits, so stored rows are only
// approximately normalised. Rows within this distance of 1 are renormalised
// on load; anything further off is rejected.
const STORED_ROW_SUM_SLACK: f64 = 1e-2;

/// Writes labels in the SLAB layout: magic, version, `c`, `n`, precision
/// tag, then row-major little-endian scalars at the matrix's precision.
pub fn write_slab<W: Write>(labels: &SoftLabelMatrix, mut w: W) -> Result<()> {
    w.write_all(SLAB_MAGIC)?;
    w.put_u16(SLAB_VERSION)?;
    w.put_u32(to_u32(labels.c(), "class count")?)?;
    w.put_u32(to_u32(labels.n(), "row count")?)?;
    w.put_u8(labels.precision().tag())?;
    for row in labels.as_matrix().row_iter() {
        for &value in row.iter() {
            match labels.precision() {
                Precision::Half => w.put_f16(value)?,
                Precision::Single => w.put_f32(value)?,
            }
        }
    }
    Ok(())
}

/// Reads a SLAB file. Rows are renormalised after widening back to `f64`.
pub fn read_slab<R: Read>(mut r: R) -> Result<SoftLabelMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SLAB_MAGIC {
        return Err(Error::format(format!("bad SLAB magic {magic:?}")));
    }
    let version = r.get_u16()?;
    if version != SLAB_VERSION {
        return Err(Error::format(format!("unsupported SLAB version {version}")));
    }
    let c = r.get_u32()? as usize;
    let n = r.get_u32()? as usize;
    let precision = Precision::from_tag(r.get_u8()?)?;
    let mut data = DMatrix::zeros(n, c);
    for i in 0..n {
        for j in 0..c {
            data[(i, j)] = match precision {
                Precision::Half => r.get_f16()?,
                Precision::Single => r.get_f32()?,
            };
        }
        let sum: f64 = data.row(i).sum();
        if !sum.is_finite() || (sum - 1.0).abs() > STORED_ROW_SUM_SLACK {
            return Err(Error::Validation(format!("stored row {i} sums to {sum}")));
        }
        data.row_mut(i).unscale_mut(sum);
    }
    SoftLabelMatrix::new(data, precision)
}

/// Reads a small CSV: a header row of class ids followed by one label per line.
pub fn read_csv<R: Read>(r: R) -> Result<SoftLabelMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let c = reader
        .headers()
        .map_err(|e| Error::format(e.to_string()))?
        .len();
    let mut values = Vec::new();
    let mut n = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(e.to_string()))?;
        if record.len() != c {
            return Err(Error::dim(format!(
                "line {}: {} fields, header has {c}",
                line + 2,
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(format!("line {}: cannot parse {field:?}", line + 2))
            })?;
            values.push(v);
        }
        n += 1;
    }
    SoftLabelMatrix::new(DMatrix::from_row_slice(n, c, &values), Precision::Single)
}

fn to_u32(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::format(format!("{what} {value} exceeds u32")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SoftLabelMatrix {
        SoftLabelMatrix::from_rows(&[vec![0.5, 0.25, 0.25], vec![0.1, 0.2, 0.7]]).unwrap()
    }

    #[test]
    fn slab_header_layout() {
        let mut buf = Vec::new();
        write_slab(&sample(), &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SLAB");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), 1);
        assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[10..14].try_into().unwrap()), 2);
        assert_eq!(buf[14], 0);
        assert_eq!(buf.len(), 15 + 2 * 3 * 2);
    }

    #[test]
    fn slab_single_round_trip() {
        let labels = sample().with_precision(Precision::Single);
        let mut buf = Vec::new();
        write_slab(&labels, &mut buf).unwrap();
        let back = read_slab(buf.as_slice()).unwrap();
        assert_eq!(back.precision(), Precision::Single);
        for (a, b) in back.as_matrix().iter().zip(labels.as_matrix().iter()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn slab_half_round_trip_is_stable() {
        let mut first = Vec::new();
        write_slab(&sample(), &mut first).unwrap();
        let back = read_slab(first.as_slice()).unwrap();
        for (a, b) in back.as_matrix().iter().zip(sample().as_matrix().iter()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn slab_rejects_bad_magic_and_truncation() {
        let mut buf = Vec::new();
        write_slab(&sample(), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_slab(bad.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_slab(&buf[..buf.len() - 1]), Err(Error::Io(_))));
    }

    #[test]
    fn csv_import() {
        let text = "0,1,2\n0.5,0.25,0.25\n0.1,0.2,0.7\n";
        let labels = read_csv(text.as_bytes()).unwrap();
        assert_eq!((labels.n(), labels.c()), (2, 3));
        assert_eq!(labels.row(1), vec![0.1, 0.2, 0.7]);
        assert!(read_csv("0,1\n0.5,0.6\n".as_bytes()).is_err());
        assert!(read_csv("0,1\n0.5\n".as_bytes()).is_err());
    }
}
