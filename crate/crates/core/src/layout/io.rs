//! Matrix files.
//!
//! Binary `GQR1`: the four ASCII bytes `GQR1`, rows as u64 LE, cols as u64
//! LE, then `rows * cols` f64 LE values in row-major order.
//!
//! CSV: one record per row, no header, values in Rust's shortest
//! round-trip decimal form. Both formats are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"GQR1";

pub fn write_gqr1<W: Write>(mut w: W, a: &DenseMatrix<f64>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(a.rows() as u64).to_le_bytes())?;
    w.write_all(&(a.cols() as u64).to_le_bytes())?;
    for v in a.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_gqr1<R: Read>(mut r: R) -> Result<DenseMatrix<f64>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word).map_err(|_| Error::Format("truncated header".into()))?;
        Ok(u64::from_le_bytes(word))
    };
    let rows = next_u64(&mut r)?;
    let cols = next_u64(&mut r)?;
    let len = rows
        .checked_mul(cols)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::Format(format!("{rows}x{cols} is too large")))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != len * 8 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, expected {} for {rows}x{cols}",
            payload.len(),
            len * 8
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DenseMatrix::from_vec(rows as usize, cols as usize, data)
}

pub fn write_csv<W: Write>(w: W, a: &DenseMatrix<f64>) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..a.rows() {
        out.write_record(a.row(i).iter().map(|v| v.to_string()))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<DenseMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Format(format!("row {rows} has {} fields, expected {}", rec.len(), cols.unwrap())));
        }
        for f in rec.iter() {
            data.push(f.parse::<f64>().map_err(|e| Error::Format(format!("row {rows}: {f:?}: {e}")))?);
        }
        rows += 1;
    }
    DenseMatrix::from_vec(rows, cols.unwrap_or(0), data)
}

/// Reads by extension: `.csv` as CSV, anything else as GQR1.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix<f64>> {
    let f = BufReader::new(File::open(path)?);
    if is_csv(path) {
        read_csv(f)
    } else {
        read_gqr1(f)
    }
}

/// Writes by extension: `.csv` as CSV, anything else as GQR1.
pub fn write_matrix(path: &Path, a: &DenseMatrix<f64>) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        write_csv(f, a)
    } else {
        write_gqr1(f, a)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
