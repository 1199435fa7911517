//! Binary field files (`EQLB1`), CSV writers and atomic file output.
//!
//! An `EQLB1` file is the 5-byte magic, `nx` and `ny` as little-endian u64,
//! `x0, y0, dx, dy, t` as little-endian f64, one kind byte (0 complex,
//! 1 real) and the row-major payload (`re, im` pairs for complex fields).

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chaoseq_core::fields::{ComplexField, Grid2D, RealField};
use num_complex::Complex64;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 5] = b"EQLB1";
const HEADER_LEN: usize = 5 + 2 * 8 + 5 * 8 + 1;
const TIME_OFFSET: usize = 53;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Complex(ComplexField),
    Real(RealField),
}

impl FieldData {
    pub fn grid(&self) -> Grid2D {
        match self {
            Self::Complex(f) => f.grid,
            Self::Real(f) => f.grid,
        }
    }
}

fn encode(field: &FieldData, t: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.nx as u64).to_le_bytes());
    out.extend_from_slice(&(g.ny as u64).to_le_bytes());
    for v in [g.x0, g.y0, g.dx, g.dy, t] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    match field {
        FieldData::Complex(f) => {
            out.push(0);
            for z in &f.values {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        FieldData::Real(f) => {
            out.push(1);
            for v in &f.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("eight bytes"))
}

fn decode(bytes: &[u8], path: &Path) -> CliResult<(FieldData, f64)> {
    if bytes.len() < HEADER_LEN || &bytes[..5] != MAGIC {
        return Err(CliError::format(path, "missing EQLB1 header"));
    }
    let nx = u64::from_le_bytes(bytes[5..13].try_into().expect("eight bytes")) as usize;
    let ny = u64::from_le_bytes(bytes[13..21].try_into().expect("eight bytes")) as usize;
    let (x0, y0, dx, dy, t) = (
        f64_at(bytes, 21),
        f64_at(bytes, 29),
        f64_at(bytes, 37),
        f64_at(bytes, 45),
        f64_at(bytes, TIME_OFFSET),
    );
    let grid = Grid2D::new(nx, ny, x0, y0, dx, dy).map_err(|e| CliError::format(path, e.to_string()))?;
    let kind = bytes[61];
    let payload = &bytes[HEADER_LEN..];
    let per = match kind {
        0 => 16,
        1 => 8,
        k => return Err(CliError::format(path, format!("unknown field kind byte {k}"))),
    };
    if payload.len() != per * nx * ny {
        return Err(CliError::format(
            path,
            format!("payload has {} bytes, expected {}", payload.len(), per * nx * ny),
        ));
    }
    let field = if kind == 0 {
        let values = payload
            .chunks_exact(16)
            .map(|c| Complex64::new(f64_at(c, 0), f64_at(c, 8)))
            .collect();
        FieldData::Complex(ComplexField { grid, values })
    } else {
        let values = payload.chunks_exact(8).map(|c| f64_at(c, 0)).collect();
        FieldData::Real(RealField { grid, values })
    };
    Ok((field, t))
}

/// Time stamp of a field file, read from its header alone.
pub fn read_time(path: &Path) -> CliResult<f64> {
    let mut head = [0u8; HEADER_LEN];
    fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut head))
        .map_err(|e| CliError::io(path, e))?;
    if &head[..5] != MAGIC {
        return Err(CliError::format(path, "missing EQLB1 header"));
    }
    Ok(f64_at(&head, TIME_OFFSET))
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = tmp_path(path);
    let write = || -> std::io::Result<()> {
        let mut f = BufWriter::new(File::create(&tmp)?);
        f.write_all(bytes)?;
        f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| CliError::io(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn write_field(path: &Path, field: &FieldData, t: f64) -> CliResult<()> {
    write_atomic(path, &encode(field, t))
}

pub fn read_field(path: &Path) -> CliResult<(FieldData, f64)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    decode(&bytes, path)
}

pub fn read_complex(path: &Path) -> CliResult<(ComplexField, f64)> {
    match read_field(path)? {
        (FieldData::Complex(f), t) => Ok((f, t)),
        _ => Err(CliError::format(path, "expected a complex field")),
    }
}

pub fn read_real(path: &Path) -> CliResult<(RealField, f64)> {
    match read_field(path)? {
        (FieldData::Real(f), t) => Ok((f, t)),
        _ => Err(CliError::format(path, "expected a real field")),
    }
}

/// Writes a CSV file from a header and pre-formatted rows.
pub fn write_csv<I, S>(path: &Path, header: &str, rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut text = String::with_capacity(4096);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r.as_ref());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Reads a CSV written by [`write_csv`] into its header and numeric rows.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::format(path, "empty CSV"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::format(path, format!("row {}: {e}", n + 1)))?;
        if row.len() != header.len() {
            return Err(CliError::format(path, format!("row {} has {} columns", n + 1, row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// `key = value` block, one pair per line.
pub fn write_key_values(path: &Path, pairs: &[(String, String)]) -> CliResult<()> {
    let mut s = String::new();
    for (k, v) in pairs {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(v);
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// File name of the snapshot with index `k`.
pub fn snapshot_name(k: usize) -> String {
    format!("psi_{k:05}.eqlb")
}
