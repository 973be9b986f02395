//! CSV serialization of table artifacts.
//!
//! Numbers are written with Rust's shortest round-trip formatting. On read a
//! cell becomes a number when it parses and prints back to the same text;
//! columns whose name ends in `_display` always stay text, so `0.0761` in a
//! display column is not mistaken for a value.

use std::path::Path;

use super::{HarnessError, TableArtifact, Value};

const DISPLAY_SUFFIX: &str = "_display";

fn csv_error(e: csv::Error) -> HarnessError {
    HarnessError::Csv(e.to_string())
}

pub fn to_csv_string(artifact: &TableArtifact) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing into memory cannot fail.
    w.write_record(artifact.headers()).expect("in-memory write");
    for row in artifact.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("CSV output is UTF-8")
}

pub fn write_csv(artifact: &TableArtifact, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, to_csv_string(artifact)).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_cell(text: &str) -> Value {
    match text.parse::<f64>() {
        Ok(v) if v.to_string() == text => Value::Num(v),
        _ => Value::Text(text.to_string()),
    }
}

/// Parses CSV text produced by [`to_csv_string`].
pub fn parse_csv(id: &str, text: &str) -> Result<TableArtifact, HarnessError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let text_cols: Vec<bool> = headers
        .iter()
        .map(|h| h.ends_with(DISPLAY_SUFFIX))
        .collect();
    let mut table = TableArtifact::new(id, headers);
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let row = rec
            .iter()
            .zip(&text_cols)
            .map(|(cell, &text)| {
                if text {
                    Value::Text(cell.to_string())
                } else {
                    parse_cell(cell)
                }
            })
            .collect();
        table.push(row)?;
    }
    Ok(table)
}

/// Reads a CSV file; the artifact id is the file stem.
pub fn read_csv(path: &Path) -> Result<TableArtifact, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&id, &text)
}
