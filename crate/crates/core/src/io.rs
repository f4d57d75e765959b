//! File formats: numeric CSV matrices (empty cell = missing), JSON reports
//! with stable key order, and dictionary export with a JSON sidecar.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so files
//! read back bitwise-identical and reruns produce byte-identical output.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dict::{
    GraphAtomMeta, GraphDictionary, GraphDictionaryKind, TimeAtomMeta, TimeDictionary,
    TimeDictionaryKind,
};
use crate::solver::{MaskedSignal, SolverError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: row {row} has {got} cells, expected {expected}")]
    RaggedRows {
        path: PathBuf,
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("{path}: cell ({row}, {col}) is not numeric: {token:?}")]
    BadCell {
        path: PathBuf,
        row: usize,
        col: usize,
        token: String,
    },
    #[error("{path}: file holds no rows")]
    Empty { path: PathBuf },
    #[error("signal has {got} rows but the graph has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("mask is {mask_rows}x{mask_cols} but signal is {rows}x{cols}")]
    MaskShapeMismatch {
        rows: usize,
        cols: usize,
        mask_rows: usize,
        mask_cols: usize,
    },
    #[error("cell ({row}, {col}) is NaN but the mask marks it observed")]
    NaNUnderObservedMask { row: usize, col: usize },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Signal(#[from] SolverError),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Parse a rectangular CSV of cells; `None` marks an empty or NaN cell.
fn read_cells(path: &Path) -> Result<Vec<Vec<Option<f64>>>, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let line_count = text.lines().count();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (r, line) in text.lines().enumerate() {
        if line.trim().is_empty() && r + 1 == line_count {
            continue;
        }
        let mut row = Vec::new();
        for (c, token) in line.split(',').enumerate() {
            let token = token.trim();
            let bad_cell = || IoError::BadCell {
                path: path.to_path_buf(),
                row: r,
                col: c,
                token: token.to_string(),
            };
            if token.is_empty() || token.eq_ignore_ascii_case("nan") {
                row.push(None);
            } else {
                let v: f64 = token.parse().map_err(|_| bad_cell())?;
                if v.is_nan() {
                    row.push(None);
                } else if !v.is_finite() {
                    return Err(bad_cell());
                } else {
                    row.push(Some(v));
                }
            }
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(IoError::RaggedRows {
                    path: path.to_path_buf(),
                    row: r,
                    expected: first.len(),
                    got: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IoError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(rows)
}

/// Read a fully numeric CSV matrix; empty or NaN cells are rejected.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>, IoError> {
    let cells = read_cells(path)?;
    let (n, t) = (cells.len(), cells[0].len());
    let mut m = DMatrix::zeros(n, t);
    for (r, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            m[(r, c)] = cell.ok_or_else(|| IoError::BadCell {
                path: path.to_path_buf(),
                row: r,
                col: c,
                token: "<missing>".into(),
            })?;
        }
    }
    Ok(m)
}

/// Write a matrix as CSV, one row per line, shortest round-trip decimals.
pub fn write_matrix_csv(m: &DMatrix<f64>, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", m[(r, c)]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(file_err(path))
}

/// Write a masked matrix as CSV with unobserved entries as empty cells.
pub fn write_masked_csv(signal: &MaskedSignal, path: &Path) -> Result<(), IoError> {
    let (x, omega) = (signal.x(), signal.omega());
    let mut out = String::new();
    for r in 0..x.nrows() {
        for c in 0..x.ncols() {
            if c > 0 {
                out.push(',');
            }
            if omega[(r, c)] == 1.0 {
                out.push_str(&format!("{}", x[(r, c)]));
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(file_err(path))
}

/// Read a signal CSV; empty or NaN cells count as missing. A mask file, when
/// given, overrides the NaN pattern — except that a NaN cell claimed
/// observed by the mask is an error. `expected_rows` checks the row count
/// against a graph's node count.
pub fn read_signal(
    path: &Path,
    mask_path: Option<&Path>,
    expected_rows: Option<usize>,
) -> Result<MaskedSignal, IoError> {
    let cells = read_cells(path)?;
    let (n, t) = (cells.len(), cells[0].len());
    if let Some(expected) = expected_rows {
        if n != expected {
            return Err(IoError::ShapeMismatch { expected, got: n });
        }
    }
    let mut x = DMatrix::zeros(n, t);
    let mut omega = DMatrix::from_element(n, t, 1.0);
    for (r, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            match cell {
                Some(v) => x[(r, c)] = *v,
                None => omega[(r, c)] = 0.0,
            }
        }
    }
    if let Some(mask_path) = mask_path {
        let mask = read_matrix_csv(mask_path)?;
        if mask.shape() != (n, t) {
            return Err(IoError::MaskShapeMismatch {
                rows: n,
                cols: t,
                mask_rows: mask.nrows(),
                mask_cols: mask.ncols(),
            });
        }
        for c in 0..t {
            for r in 0..n {
                if mask[(r, c)] == 1.0 && omega[(r, c)] == 0.0 {
                    return Err(IoError::NaNUnderObservedMask { row: r, col: c });
                }
            }
        }
        omega = mask;
    }
    Ok(MaskedSignal::new(x, omega)?)
}

/// Read one integer label per line.
pub fn read_labels(path: &Path) -> Result<Vec<usize>, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let mut labels = Vec::new();
    for (r, line) in text.lines().enumerate() {
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        labels.push(token.parse().map_err(|_| IoError::BadCell {
            path: path.to_path_buf(),
            row: r,
            col: 0,
            token: token.to_string(),
        })?);
    }
    Ok(labels)
}

pub fn write_labels(labels: &[usize], path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&format!("{l}\n"));
    }
    fs::write(path, out).map_err(file_err(path))
}

/// Pretty-printed JSON with a trailing newline. Key order follows struct
/// declaration order, so identical values serialize byte-identically.
pub fn write_report<T: Serialize>(report: &T, path: &Path) -> Result<(), IoError> {
    let mut file = fs::File::create(path).map_err(file_err(path))?;
    let json = serde_json::to_string_pretty(report).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(json.as_bytes()).map_err(file_err(path))?;
    file.write_all(b"\n").map_err(file_err(path))
}

pub fn read_report<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphDictSidecar {
    kind: GraphDictionaryKind,
    orthonormal_columns: bool,
    atom_meta: Vec<GraphAtomMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimeDictSidecar {
    kind: TimeDictionaryKind,
    orthonormal_rows: bool,
    atom_meta: Vec<TimeAtomMeta>,
}

/// Export a graph dictionary: matrix CSV plus a JSON sidecar with kind,
/// orthonormality flag, and atom metadata.
pub fn write_graph_dictionary(
    dict: &GraphDictionary,
    csv_path: &Path,
    sidecar_path: &Path,
) -> Result<(), IoError> {
    write_matrix_csv(&dict.psi, csv_path)?;
    write_report(
        &GraphDictSidecar {
            kind: dict.kind,
            orthonormal_columns: dict.orthonormal_columns,
            atom_meta: dict.atom_meta.clone(),
        },
        sidecar_path,
    )
}

pub fn read_graph_dictionary(
    csv_path: &Path,
    sidecar_path: &Path,
) -> Result<GraphDictionary, IoError> {
    let psi = read_matrix_csv(csv_path)?;
    let sidecar: GraphDictSidecar = read_report(sidecar_path)?;
    Ok(GraphDictionary {
        psi,
        kind: sidecar.kind,
        orthonormal_columns: sidecar.orthonormal_columns,
        atom_meta: sidecar.atom_meta,
    })
}

pub fn write_time_dictionary(
    dict: &TimeDictionary,
    csv_path: &Path,
    sidecar_path: &Path,
) -> Result<(), IoError> {
    write_matrix_csv(&dict.phi, csv_path)?;
    write_report(
        &TimeDictSidecar {
            kind: dict.kind,
            orthonormal_rows: dict.orthonormal_rows,
            atom_meta: dict.atom_meta.clone(),
        },
        sidecar_path,
    )
}

pub fn read_time_dictionary(
    csv_path: &Path,
    sidecar_path: &Path,
) -> Result<TimeDictionary, IoError> {
    let phi = read_matrix_csv(csv_path)?;
    let sidecar: TimeDictSidecar = read_report(sidecar_path)?;
    Ok(TimeDictionary {
        phi,
        kind: sidecar.kind,
        orthonormal_rows: sidecar.orthonormal_rows,
        atom_meta: sidecar.atom_meta,
    })
}
