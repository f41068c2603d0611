//! Matrix Market, CSV and manifest files.

mod manifest;

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::io::{load_coo_from_matrix_market_file, save_to_matrix_market_file};
use nalgebra_sparse::CscMatrix;

use crate::error::{Error, Result};

pub use manifest::{
    load_manifest, write_manifest, ControlSpec, GridSpec, Manifest, MatrixTerm, ParameterBox,
    RhsEntry, VectorSource, VectorTerm, MANIFEST_SCHEMA,
};

pub fn read_sparse(path: &Path) -> Result<CscMatrix<f64>> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    // An array file with zero columns has no entries to parse.
    if let Some((r, 0)) = empty_array_shape(path)? {
        return Ok(CscMatrix::zeros(r, 0));
    }
    let coo =
        load_coo_from_matrix_market_file::<f64, _>(path).map_err(|e| Error::parse(path, e))?;
    Ok(CscMatrix::from(&coo))
}

fn empty_array_shape(path: &Path) -> Result<Option<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().to_ascii_lowercase();
    if !header.contains("array") {
        return Ok(None);
    }
    let size = lines.find(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let dims: Vec<usize> = size
        .unwrap_or_default()
        .split_whitespace()
        .filter_map(|s| s.parse().ok())
        .collect();
    match dims.as_slice() {
        [r, c] if *r == 0 || *c == 0 => Ok(Some((*r, *c))),
        _ => Ok(None),
    }
}

pub fn read_dense(path: &Path) -> Result<DMatrix<f64>> {
    Ok(crate::linalg::to_dense(&read_sparse(path)?))
}

/// Reads an `n×1` or `1×n` matrix as a vector.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_dense(path)?;
    if m.ncols() == 1 || m.nrows() == 1 {
        Ok(DVector::from_column_slice(m.as_slice()))
    } else {
        Err(Error::parse(
            path,
            format!(
                "expected a vector, found a {}x{} matrix",
                m.nrows(),
                m.ncols()
            ),
        ))
    }
}

pub fn write_sparse(path: &Path, m: &CscMatrix<f64>) -> Result<()> {
    save_to_matrix_market_file(m, path).map_err(|e| Error::io(path, e))
}

/// Dense Matrix Market array file, column-major, shortest round-trip floats.
pub fn write_dense(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::with_capacity(m.len() * 24 + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
    for v in m.iter() {
        out.push_str(&format!("{v:e}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// CSV with a header row and one record per row of `rows`.
pub fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    w.write_record(header).map_err(|e| Error::parse(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Numeric CSV with a header row; returns the header and the records.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        })?;
    let header = r
        .headers()
        .map_err(|e| Error::parse(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(path, format!("row {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))
}
