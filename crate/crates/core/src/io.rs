//! Dataset, config, constraint and matrix files.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{ConstraintSet, DataMatrix};
use crate::linalg::DenseMatrix;
use crate::pipeline::TsnmfConfig;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub x: DataMatrix<T>,
    pub labels: Option<Vec<usize>>,
    pub name: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: DataMatrix<T>, labels: Option<Vec<usize>>, name: impl Into<String>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != x.num_samples() {
                return Err(Error::dims("dataset labels", x.num_samples(), l.len()));
            }
        }
        Ok(Self {
            x,
            labels,
            name: name.into(),
        })
    }

    pub fn num_samples(&self) -> usize {
        self.x.num_samples()
    }

    /// Number of distinct labels, if labeled.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Reads a data CSV and an optional labels file. The dataset name is the
/// data file stem.
pub fn load_dataset<T: Scalar>(data: &Path, labels: Option<&Path>) -> Result<Dataset<T>> {
    let x = parse_data_csv(&read_text(data)?, data)?;
    let labels = match labels {
        Some(p) => {
            let l = parse_labels(&read_text(p)?, p)?;
            if l.len() != x.num_samples() {
                return Err(Error::Parse {
                    path: p.to_path_buf(),
                    line: l.len().min(x.num_samples()) + 1,
                    message: format!(
                        "{} labels for {} samples",
                        l.len(),
                        x.num_samples()
                    ),
                });
            }
            Some(l)
        }
        None => None,
    };
    let name = data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(x, labels, name)
}

/// One sample per row. A first row with any non-numeric cell is a header.
pub fn parse_data_csv<T: Scalar>(text: &str, origin: &Path) -> Result<DataMatrix<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line: line as usize,
        message,
    };
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if rows == 0 && width.is_none() => {
                width = Some(record.len());
                continue;
            }
            Err(_) => {
                let (col, cell) = record
                    .iter()
                    .enumerate()
                    .find(|(_, c)| c.parse::<f64>().is_err())
                    .expect("some cell failed to parse");
                return Err(parse_err(line, format!("column {}: non-numeric cell {cell:?}", col + 1)));
            }
        };
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(parse_err(line, format!("column {}: non-finite value", col + 1)));
        }
        match width {
            Some(w) if w != row.len() => {
                return Err(parse_err(line, format!("expected {w} fields, got {}", row.len())));
            }
            _ => width = Some(row.len()),
        }
        values.extend(row.into_iter().map(T::lit));
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(parse_err(1, "no numeric rows".into()));
    }
    DataMatrix::from_samples(DenseMatrix::from_vec(rows, cols, values)?)
}

/// One label token per non-empty line, mapped to dense ids in order of first
/// appearance.
pub fn parse_labels(text: &str, origin: &Path) -> Result<Vec<usize>> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        if token.contains(',') {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                message: format!("expected a single label token, got {token:?}"),
            });
        }
        let next = ids.len();
        out.push(*ids.entry(token).or_insert(next));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<TsnmfConfig> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

pub fn read_constraints(path: &Path) -> Result<ConstraintSet> {
    ConstraintSet::parse(&read_text(path)?, path)
}

pub fn write_constraints(path: &Path, c: &ConstraintSet) -> Result<()> {
    write_text(path, &c.to_text())
}

/// 17 significant digits; parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Dense CSV, no header.
pub fn matrix_to_csv<T: Scalar>(m: &DenseMatrix<T>) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 24);
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format_float(v.to_f64_lossy())).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv<T: Scalar>(path: &Path, m: &DenseMatrix<T>) -> Result<()> {
    write_text(path, &matrix_to_csv(m))
}

/// One integer per line.
pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    write_text(path, &out)
}
