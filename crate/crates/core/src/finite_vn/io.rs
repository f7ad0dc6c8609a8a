//! Matrix file formats.
//!
//! JSON: `{"dim": m, "entries": [[[re, im], ...], ...]}`, row-major.
//!
//! Binary: 16-byte header (`b"PVLB"`, `u32` LE dim, `u32` reserved = 0)
//! followed by `dim * dim` interleaved little-endian `f64` pairs `(re, im)`,
//! row-major.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_vn::TracedMatrix;

pub const BINARY_MAGIC: &[u8; 4] = b"PVLB";

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

pub fn to_json(x: &TracedMatrix) -> String {
    let n = x.dim();
    let doc = MatrixJson { dim: n, entries: (0..n).map(|i| x.row(i).iter().map(|z| [z.re, z.im]).collect()).collect() };
    serde_json::to_string(&doc).expect("matrix serialization cannot fail")
}

pub fn from_json(s: &str) -> Result<TracedMatrix> {
    let doc: MatrixJson = serde_json::from_str(s)?;
    if doc.entries.len() != doc.dim {
        return Err(Error::Format(format!("expected {} rows, found {}", doc.dim, doc.entries.len())));
    }
    let rows = doc.entries.into_iter().map(|r| r.into_iter().map(|[re, im]| c64::new(re, im)).collect()).collect();
    TracedMatrix::from_rows(rows)
}

pub fn write_binary<W: Write>(x: &TracedMatrix, mut w: W) -> Result<()> {
    let dim = u32::try_from(x.dim()).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&dim.to_le_bytes())?;
    // reserved word, then padding to the 16-byte header
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for z in x.as_slice() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn to_binary(x: &TracedMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + 16 * x.dim() * x.dim());
    write_binary(x, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn read_binary<R: Read>(mut r: R) -> Result<TracedMatrix> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != BINARY_MAGIC {
        return Err(Error::Format("bad magic, expected PVLB".into()));
    }
    let dim = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 16 * dim * dim {
        return Err(Error::Format(format!(
            "expected {} payload bytes for dim {dim}, found {}",
            16 * dim * dim,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            c64::new(re, im)
        })
        .collect();
    TracedMatrix::new(dim, data)
}

/// Reads a matrix file, choosing the format by sniffing the magic bytes.
pub fn read_matrix_file(path: &Path) -> Result<TracedMatrix> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        from_json(std::str::from_utf8(&bytes).map_err(|e| Error::Format(e.to_string()))?)
    }
}
