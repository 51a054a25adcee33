//! JSON ensemble files: `{"dim": p, "matrices": [[[row...]...]...]}`.
//!
//! Numbers are written with 17 significant digits so that a write/read cycle
//! reproduces every entry bit for bit.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::Deserialize;
use thiserror::Error;

use crate::error::KarcherError;
use crate::experiment::format_f64;
use crate::spd::SpdMatrix;

#[derive(Debug, Error)]
pub enum EnsembleFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("malformed ensemble file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("ensemble file lists no matrices")]
    Empty,

    #[error("matrix {index}: {detail}")]
    Shape { index: usize, detail: String },

    #[error("matrix {index}: {source}")]
    Invalid { index: usize, source: KarcherError },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleFile {
    dim: usize,
    matrices: Vec<Vec<Vec<f64>>>,
}

/// Parses and validates an ensemble. Every matrix must be `dim x dim`,
/// symmetric to `1e-12` relative, and positive definite.
pub fn parse_ensemble(text: &str) -> Result<Vec<SpdMatrix>, EnsembleFileError> {
    let file: EnsembleFile = serde_json::from_str(text)?;
    if file.matrices.is_empty() {
        return Err(EnsembleFileError::Empty);
    }
    let p = file.dim;
    if p == 0 {
        return Err(EnsembleFileError::Shape {
            index: 0,
            detail: "dim must be positive".into(),
        });
    }
    file.matrices
        .into_iter()
        .enumerate()
        .map(|(index, rows)| {
            if rows.len() != p {
                return Err(EnsembleFileError::Shape {
                    index,
                    detail: format!("has {} rows, expected {p}", rows.len()),
                });
            }
            if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != p) {
                return Err(EnsembleFileError::Shape {
                    index,
                    detail: format!("row {r} has {} entries, expected {p}", row.len()),
                });
            }
            let m = Array2::from_shape_fn((p, p), |(i, j)| rows[i][j]);
            SpdMatrix::new(m).map_err(|source| EnsembleFileError::Invalid { index, source })
        })
        .collect()
}

pub fn read_ensemble(path: &Path) -> Result<Vec<SpdMatrix>, EnsembleFileError> {
    let text = fs::read_to_string(path).map_err(|source| EnsembleFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_ensemble(&text)
}

/// Serializes square matrices of a common size in the ensemble schema.
pub fn ensemble_to_json(mats: &[&Array2<f64>]) -> String {
    let dim = mats.first().map_or(0, |m| m.nrows());
    let mut out = format!("{{\n  \"dim\": {dim},\n  \"matrices\": [");
    for (k, m) in mats.iter().enumerate() {
        out.push_str(if k == 0 { "\n    [" } else { ",\n    [" });
        for (i, row) in m.rows().into_iter().enumerate() {
            out.push_str(if i == 0 { "\n      [" } else { ",\n      [" });
            let cells: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
            out.push_str(&cells.join(", "));
            out.push(']');
        }
        out.push_str("\n    ]");
    }
    out.push_str("\n  ]\n}\n");
    out
}

pub fn write_ensemble(path: &Path, mats: &[&Array2<f64>]) -> std::io::Result<()> {
    fs::write(path, ensemble_to_json(mats))
}
