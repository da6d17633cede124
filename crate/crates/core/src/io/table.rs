//! Delimiter-separated numeric tables and data set loading.

use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{GoalError, Result};
use crate::model::{one_hot_binary, DataSet};
use crate::numerics::Matrix;

use super::write_atomic;

/// On-disk layout of a features file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// One row per instance, one column per feature.
    #[default]
    Instances,
    /// One row per feature, one column per instance.
    Features,
}

/// Label rows that may be off by this much from summing to one are
/// accepted and renormalized.
const LABEL_SUM_TOL: f64 = 1e-9;

/// Parsed numeric table: optional header plus rectangular rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn ncols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

fn sniff_delimiter(text: &str) -> u8 {
    let first = text.lines().next().unwrap_or("");
    [b',', b'\t', b';']
        .into_iter()
        .find(|&d| first.contains(d as char))
        .unwrap_or(b',')
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a numeric table. A first row containing any non-numeric cell is
/// taken as a header. Row and column numbers in errors are 1-based.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| GoalError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(sniff_delimiter(&text))
        .from_reader(text.as_bytes());

    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| GoalError::format(path, format!("row {line}: {e}")))?;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if i == 0 && record.iter().any(|c| parse_cell(c).is_none()) {
            header = Some(record.iter().map(|c| c.trim().to_string()).collect());
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            row.push(parse_cell(cell).ok_or_else(|| {
                GoalError::format(
                    path,
                    format!("row {line}, column {}: '{}' is not a finite number", j + 1, cell.trim()),
                )
            })?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(GoalError::format(
                    path,
                    format!("row {line} has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(GoalError::format(path, "no numeric rows"));
    }
    Ok(Table { header, rows })
}

/// Feature matrix (D × T) from a table in the given orientation.
pub fn read_features(path: &Path, orientation: Orientation) -> Result<Matrix> {
    let table = read_table(path)?;
    let (n_rows, n_cols) = (table.rows.len(), table.ncols());
    let flat: Vec<f64> = table.rows.into_iter().flatten().collect();
    Ok(match orientation {
        // rows are instances: the row-major buffer is the column-major D × T matrix
        Orientation::Instances => Matrix::from_vec(n_cols, n_rows, flat),
        Orientation::Features => Matrix::from_row_slice(n_rows, n_cols, &flat),
    })
}

/// Label probabilities (M × T) from one 0/1 column or an M-column
/// probability table with one row per instance.
pub fn read_labels(path: &Path) -> Result<Matrix> {
    let table = read_table(path)?;
    if table.ncols() == 1 {
        let mut labels = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.iter().enumerate() {
            let v = row[0];
            if v != 0.0 && v != 1.0 {
                return Err(GoalError::format(
                    path,
                    format!("row {}, column 1: binary label must be 0 or 1, got {v}", data_line(&table, i)),
                ));
            }
            labels.push(v as u8);
        }
        return one_hot_binary(&labels);
    }

    let m = table.ncols();
    let mut pi = Matrix::zeros(m, table.rows.len());
    for (t, row) in table.rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(GoalError::format(
                    path,
                    format!("row {}, column {}: probability {v} outside [0, 1]", data_line(&table, t), j + 1),
                ));
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > LABEL_SUM_TOL {
            return Err(GoalError::format(
                path,
                format!("row {}: label probabilities sum to {sum}, expected 1", data_line(&table, t)),
            ));
        }
        // Fold rounding error into the largest entry so the column sums to 1 exactly.
        let mut col: Vec<f64> = row.iter().map(|v| v / sum).collect();
        let top = crate::model::argmax(col.iter().copied());
        let rest: f64 = col.iter().enumerate().filter(|(i, _)| *i != top).map(|(_, v)| v).sum();
        col[top] = 1.0 - rest;
        for (j, v) in col.into_iter().enumerate() {
            pi[(j, t)] = v;
        }
    }
    Ok(pi)
}

fn data_line(table: &Table, row_index: usize) -> usize {
    row_index + 1 + usize::from(table.header.is_some())
}

pub fn load_dataset(features: &Path, labels: &Path, orientation: Orientation) -> Result<DataSet> {
    let x = read_features(features, orientation)?;
    let pi = read_labels(labels)?;
    if x.ncols() != pi.ncols() {
        return Err(GoalError::format(
            labels,
            format!(
                "{} label rows but {} feature instances in {}",
                pi.ncols(),
                x.ncols(),
                features.display()
            ),
        ));
    }
    DataSet::new(x, pi)
}

/// Writes rows atomically, rendering floats with Rust's shortest
/// round-tripping representation.
pub fn write_table(path: &Path, header: Option<&[String]>, rows: &[Vec<String>]) -> Result<()> {
    write_atomic(path, |w| {
        if let Some(h) = header {
            writeln!(w, "{}", h.join(","))?;
        }
        for row in rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })
}

/// Writes a D × T feature matrix with one row per instance.
pub fn write_features(path: &Path, x: &Matrix) -> Result<()> {
    let header: Vec<String> = (0..x.nrows()).map(|d| format!("f{d}")).collect();
    let rows: Vec<Vec<String>> = x
        .column_iter()
        .map(|c| c.iter().map(|v| v.to_string()).collect())
        .collect();
    write_table(path, Some(&header), &rows)
}

/// Writes labels as a 0/1 column when they are one-hot binary (row 0 ↔ 1),
/// otherwise as an M-column probability table.
pub fn write_labels(path: &Path, pi: &Matrix) -> Result<()> {
    let binary = pi.nrows() == 2 && pi.iter().all(|&v| v == 0.0 || v == 1.0);
    if binary {
        let rows: Vec<Vec<String>> = pi
            .column_iter()
            .map(|c| vec![if c[0] == 1.0 { "1" } else { "0" }.to_string()])
            .collect();
        write_table(path, Some(&["label".to_string()]), &rows)
    } else {
        let header: Vec<String> = (0..pi.nrows()).map(|m| format!("p{m}")).collect();
        let rows: Vec<Vec<String>> = pi
            .column_iter()
            .map(|c| c.iter().map(|v| v.to_string()).collect())
            .collect();
        write_table(path, Some(&header), &rows)
    }
}
