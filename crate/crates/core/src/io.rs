//! CSV matrices and flat `key=value` config files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Reads a row-major matrix of signed decimal integers, one row per line,
/// no header.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    read_matrix(fs::File::open(path)?)
}

pub fn read_matrix<R: Read>(reader: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<i64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<i64>()
                    .map_err(|_| Error::Parse(format!("line {}: `{f}` is not an integer", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write_matrix(&mut f, m)
}

pub fn write_matrix<W: Write>(writer: W, m: &Matrix) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for r in 0..m.rows() {
        wtr.write_record(m.row(r).iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}
