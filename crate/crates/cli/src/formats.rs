//! On-disk formats.
//!
//! * Matrices: headerless CSV, one row per line, values written with 17
//!   significant digits so every `f64` round-trips exactly. Files ending in
//!   `.bin` use a binary layout instead: the magic bytes `MCOL1`, rows and
//!   columns as little-endian `u64`, then the entries as little-endian `f64`
//!   in row-major order.
//! * Observation sets: JSON, see [`ObservationFile`].
//!
//! All writes go to a temporary file in the target directory that is then
//! renamed over the destination.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use matcol::{DenseMatrix, ObservationMode, ObservationSet, PartialColumn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const BINARY_MAGIC: &[u8; 5] = b"MCOL1";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("bin"))
}

pub fn encode_matrix(path: &Path, m: &DenseMatrix) -> CliResult<Vec<u8>> {
    let (rows, cols) = m.shape();
    if is_binary(path) {
        let mut out = Vec::with_capacity(21 + 8 * rows * cols);
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(rows as u64).to_le_bytes());
        out.extend_from_slice(&(cols as u64).to_le_bytes());
        for v in m.to_row_major() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        return Ok(out);
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for i in 0..rows {
        w.write_record((0..cols).map(|j| format!("{:.16e}", m.get(i, j))))
            .map_err(|e| CliError::usage(format!("cannot encode {}: {e}", path.display())))?;
    }
    w.into_inner()
        .map_err(|e| CliError::usage(format!("cannot encode {}: {e}", path.display())))
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> CliResult<()> {
    write_atomic(path, &encode_matrix(path, m)?)
}

pub fn read_matrix(path: &Path) -> CliResult<DenseMatrix> {
    let bytes = read_bytes(path)?;
    if is_binary(path) {
        decode_binary(path, &bytes)
    } else {
        decode_csv(path, &bytes)
    }
}

fn decode_binary(path: &Path, bytes: &[u8]) -> CliResult<DenseMatrix> {
    let bad = |msg: String| CliError::usage(format!("{}: {msg}", path.display()));
    if bytes.len() < 21 || &bytes[..5] != BINARY_MAGIC {
        return Err(bad("not an MCOL1 binary matrix".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[5 + 8 * k..13 + 8 * k].try_into().unwrap());
    let (rows, cols) = (word(0), word(1));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(21));
    if expected != Some(bytes.len() as u64) {
        return Err(bad(format!(
            "header declares {rows}x{cols} but the file has {} bytes",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes[21..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(bad(format!(
            "non-finite entry at row {}, column {}",
            k as u64 / cols + 1,
            k as u64 % cols + 1
        )));
    }
    Ok(DenseMatrix::from_row_major(rows as usize, cols as usize, &data)?)
}

fn decode_csv(path: &Path, bytes: &[u8]) -> CliResult<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::parse(path, line, 1, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(CliError::parse(
                    path,
                    line,
                    record.len().min(c) as u64 + 1,
                    format!("expected {c} fields, found {}", record.len()),
                ))
            }
            Some(_) => {}
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::parse(path, line, j as u64 + 1, format!("not a number: {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(CliError::parse(path, line, j as u64 + 1, "non-finite value"));
            }
            data.push(v);
        }
        rows += 1;
    }
    match cols {
        Some(c) if c > 0 => Ok(DenseMatrix::from_row_major(rows, c, &data)?),
        _ => Err(CliError::parse(path, 1, 1, "empty matrix file")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullColumnEntry {
    pub index: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialColumnEntry {
    pub index: usize,
    /// Omitted in aligned files, where `shared_rows` applies to every column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<usize>>,
    pub values: Vec<f64>,
}

/// JSON layout of an observation set.
///
/// `full_columns` has one entry per draw, so a column drawn twice appears
/// twice and `d` equals the number of entries. Row lists keep their
/// multiplicity. Aligned files store the common row multiset once, in
/// `shared_rows`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFile {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub mode: ObservationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_rows: Option<Vec<usize>>,
    pub full_columns: Vec<FullColumnEntry>,
    pub partial_columns: Vec<PartialColumnEntry>,
}

impl ObservationFile {
    pub fn from_set(obs: &ObservationSet) -> Self {
        let aligned = obs.mode() == ObservationMode::Aligned;
        let shared_rows = if aligned {
            obs.partial_columns().first().map(|p| p.rows.clone())
        } else {
            None
        };
        Self {
            m: obs.nrows(),
            n: obs.ncols(),
            d: obs.d(),
            s: obs.s(),
            mode: obs.mode(),
            shared_rows,
            full_columns: obs
                .draws()
                .iter()
                .map(|&j| FullColumnEntry {
                    index: j,
                    values: obs.full_columns()[&j].iter().copied().collect(),
                })
                .collect(),
            partial_columns: obs
                .partial_columns()
                .iter()
                .map(|p| PartialColumnEntry {
                    index: p.index,
                    rows: (!aligned).then(|| p.rows.clone()),
                    values: p.values.clone(),
                })
                .collect(),
        }
    }

    pub fn into_set(self) -> matcol::Result<ObservationSet> {
        use matcol::Error;
        if self.d != self.full_columns.len() {
            return Err(Error::Config(format!(
                "d = {} but {} full column entries are listed",
                self.d,
                self.full_columns.len()
            )));
        }
        let mut draws = Vec::with_capacity(self.d);
        let mut full: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
        for entry in self.full_columns {
            draws.push(entry.index);
            let col = DVector::from_vec(entry.values);
            match full.get(&entry.index) {
                Some(prev) if *prev != col => {
                    return Err(Error::Config(format!(
                        "column {} is listed twice with different values",
                        entry.index
                    )))
                }
                Some(_) => {}
                None => {
                    full.insert(entry.index, col);
                }
            }
        }
        let mut partial = Vec::with_capacity(self.partial_columns.len());
        for entry in self.partial_columns {
            let rows = match (entry.rows, &self.shared_rows) {
                (Some(rows), _) => rows,
                (None, Some(shared)) => shared.clone(),
                (None, None) => {
                    return Err(Error::Config(format!(
                        "partial column {} has no rows and there is no shared_rows",
                        entry.index
                    )))
                }
            };
            partial.push(PartialColumn {
                index: entry.index,
                rows,
                values: entry.values,
            });
        }
        ObservationSet::new(self.m, self.n, self.s, self.mode, draws, full, partial)
    }
}

pub fn write_observations(path: &Path, obs: &ObservationSet) -> CliResult<()> {
    let json = serde_json::to_vec_pretty(&ObservationFile::from_set(obs))
        .map_err(|e| CliError::usage(format!("cannot encode observations: {e}")))?;
    write_atomic(path, &json)
}

pub fn read_observations(path: &Path) -> CliResult<ObservationSet> {
    let bytes = read_bytes(path)?;
    let file: ObservationFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::parse(path, e.line() as u64, e.column() as u64, e.to_string()))?;
    Ok(file.into_set()?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut json = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::usage(format!("cannot encode {}: {e}", path.display())))?;
    json.push(b'\n');
    write_atomic(path, &json)
}

/// Reads a JSON document, reporting the position of the first error.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::parse(path, e.line() as u64, e.column() as u64, e.to_string()))
}
