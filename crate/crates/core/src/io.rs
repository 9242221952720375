//! Matrix file formats.
//!
//! * Dense CSV: one matrix row per line, comma-separated numbers, no header.
//! * `LSMX`: the 4-byte magic `LSMX`, then little-endian `u32` version (= 1),
//!   `u32` rows, `u32` cols, followed by `rows·cols` little-endian `f64`
//!   values in row-major order.
//! * Sparse triples: CSV with header `i,j,value` and one nonzero per line.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LsError, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};

pub const LSMX_MAGIC: &[u8; 4] = b"LSMX";
pub const LSMX_VERSION: u32 = 1;
const LSMX_HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Csv,
    Lsmx,
}

impl MatrixFormat {
    /// Guesses the format from a file extension (`.lsmx` or anything else).
    pub fn from_path(path: &Path) -> MatrixFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("lsmx") => MatrixFormat::Lsmx,
            _ => MatrixFormat::Csv,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Lsmx => "lsmx",
        }
    }
}

pub fn encode_lsmx(matrix: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(LSMX_HEADER_LEN + 8 * matrix.len());
    out.extend_from_slice(LSMX_MAGIC);
    out.extend_from_slice(&LSMX_VERSION.to_le_bytes());
    out.extend_from_slice(&(matrix.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(matrix.cols() as u32).to_le_bytes());
    for v in matrix.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4-byte slice")))
        .ok_or(LsError::Parse {
            offset,
            message: format!(
                "truncated header: need 4 bytes, {} available",
                bytes.len().saturating_sub(offset)
            ),
        })
}

pub fn decode_lsmx(bytes: &[u8]) -> Result<DenseMatrix> {
    match bytes.get(..4) {
        Some(magic) if magic == LSMX_MAGIC => {}
        Some(magic) => {
            return Err(LsError::Parse {
                offset: 0,
                message: format!(
                    "bad magic {:?}, expected \"LSMX\"",
                    String::from_utf8_lossy(magic)
                ),
            })
        }
        None => {
            return Err(LsError::Parse {
                offset: 0,
                message: format!("file too short for magic ({} bytes)", bytes.len()),
            })
        }
    }
    let version = read_u32(bytes, 4)?;
    if version != LSMX_VERSION {
        return Err(LsError::Parse {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let expected = LSMX_HEADER_LEN + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(LsError::Parse {
            offset: bytes.len().min(expected),
            message: format!(
                "expected {expected} bytes for a {rows}x{cols} payload, found {}",
                bytes.len()
            ),
        });
    }
    let data: Vec<f64> = bytes[LSMX_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(LsError::Parse {
            offset: LSMX_HEADER_LEN + 8 * k,
            message: format!("non-finite value {}", data[k]),
        });
    }
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn encode_csv(matrix: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..matrix.rows() {
        let line: Vec<String> = matrix.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        let mut field_start = start + (line.len() - line.trim_start().len());
        for field in trimmed.split(',') {
            let value: f64 = field.trim().parse().map_err(|_| LsError::Parse {
                offset: field_start,
                message: format!("not a number: {:?}", field.trim()),
            })?;
            if !value.is_finite() {
                return Err(LsError::Parse {
                    offset: field_start,
                    message: format!("non-finite value {value}"),
                });
            }
            row.push(value);
            field_start += field.len() + 1;
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(LsError::Parse {
                    offset: start,
                    message: format!("row has {} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(LsError::Parse {
            offset: 0,
            message: "empty matrix file".into(),
        });
    }
    DenseMatrix::from_rows(&rows)
}

/// Reads a matrix; files starting with the `LSMX` magic or carrying a `.lsmx`
/// extension are decoded as binary, everything else as CSV.
pub fn read_matrix(path: &Path) -> Result<(DenseMatrix, MatrixFormat)> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(LSMX_MAGIC) || MatrixFormat::from_path(path) == MatrixFormat::Lsmx {
        return Ok((decode_lsmx(&bytes)?, MatrixFormat::Lsmx));
    }
    let text = String::from_utf8(bytes).map_err(|e| LsError::Parse {
        offset: e.utf8_error().valid_up_to(),
        message: "invalid UTF-8 in CSV matrix".into(),
    })?;
    Ok((decode_csv(&text)?, MatrixFormat::Csv))
}

pub fn write_matrix(path: &Path, matrix: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Csv => fs::write(path, encode_csv(matrix))?,
        MatrixFormat::Lsmx => fs::write(path, encode_lsmx(matrix))?,
    }
    Ok(())
}

pub fn encode_triples(sparse: &SparseMatrix) -> String {
    let mut out = String::from("i,j,value\n");
    for &(i, j, v) in sparse.entries() {
        out.push_str(&format!("{i},{j},{v}\n"));
    }
    out
}

pub fn write_triples(path: &Path, sparse: &SparseMatrix) -> Result<()> {
    fs::write(path, encode_triples(sparse))?;
    Ok(())
}

/// Parses a triples file for a matrix of the given shape.
pub fn decode_triples(text: &str, rows: usize, cols: usize) -> Result<SparseMatrix> {
    let mut entries = Vec::new();
    let mut offset = 0;
    for (lineno, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        let trimmed = line.trim();
        if trimmed.is_empty() || (lineno == 0 && trimmed.starts_with('i')) {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let bad = |message: String| LsError::Parse {
            offset: start,
            message,
        };
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", fields.len())));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad row index {:?}", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad column index {:?}", fields[1])))?;
        let v: f64 = fields[2]
            .parse()
            .map_err(|_| bad(format!("bad value {:?}", fields[2])))?;
        entries.push((i, j, v));
    }
    SparseMatrix::from_triples(rows, cols, entries)
}
