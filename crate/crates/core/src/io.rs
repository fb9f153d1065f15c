//! CSV matrices and the on-disk bundles for datasets and fitted states.
//!
//! Numbers are written with the shortest representation that parses back
//! to the same `f64`, so export followed by ingest is lossless.

use std::fs;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GlenError, Result};
use crate::glen::{Diagnostics, GlenConfig, GlenState};
use crate::graph::LaplacianMatrix;
use crate::signal::SignalDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub has_header: bool,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { has_header: false, delimiter: b',' }
    }
}

/// Parses a rectangular numeric table. Row and column indices in errors
/// are zero-based data positions (the header row is not counted).
pub fn parse_csv_matrix<R: Read>(reader: R, opts: &CsvOptions) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(GlenError::Parse {
                    row: r,
                    col: rec.len().min(w),
                    msg: format!("ragged row: expected {w} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| GlenError::Parse {
                row: r,
                col: c,
                msg: format!("non-numeric cell {field:?}"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = width.ok_or_else(|| GlenError::Empty("csv contains no data rows".into()))?;
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn ingest_csv_matrix(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<DMatrix<f64>> {
    parse_csv_matrix(fs::File::open(path)?, opts)
}

fn fmt(v: f64) -> String {
    // Debug output is the shortest round-trip form ("1.0", "1e-20")
    format!("{v:?}")
}

pub fn write_csv_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(path)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// One value per line.
pub fn write_csv_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    write_csv_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v))
}

pub fn read_csv_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let m = ingest_csv_matrix(path, &CsvOptions::default())?;
    if m.ncols() != 1 && m.nrows() != 1 {
        return Err(GlenError::Dimension(format!("expected a vector, found {}x{}", m.nrows(), m.ncols())));
    }
    Ok(m.iter().copied().collect())
}

pub fn read_laplacian(path: impl AsRef<Path>) -> Result<LaplacianMatrix> {
    LaplacianMatrix::new(ingest_csv_matrix(path, &CsvOptions::default())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateManifest {
    pub config: GlenConfig,
    pub n_nodes: usize,
    pub n_signals: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Writes `L.csv`, `Y.csv`, `mu.csv`, `trace.csv` and `manifest.json`.
pub fn save_state(dir: impl AsRef<Path>, state: &GlenState, cfg: &GlenConfig) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_csv_matrix(dir.join("L.csv"), state.l.matrix())?;
    write_csv_matrix(dir.join("Y.csv"), &state.y)?;
    write_csv_vector(dir.join("mu.csv"), &state.mu)?;
    write_csv_vector(dir.join("trace.csv"), &state.objective_trace)?;
    let manifest = StateManifest {
        config: cfg.clone(),
        n_nodes: state.n_nodes(),
        n_signals: state.n_signals(),
        iterations: state.iterations,
        converged: state.converged,
        final_objective: state.final_objective(),
        diagnostics: state.diagnostics.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Writes `X.csv` and, for synthetic data, `L0.csv`, `Y.csv` and `mu.csv`,
/// plus a manifest echoing `meta`.
pub fn save_dataset<M: Serialize>(dir: impl AsRef<Path>, data: &SignalDataset, meta: &M) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_csv_matrix(dir.join("X.csv"), &data.x)?;
    if let Some(gt) = &data.ground_truth {
        write_csv_matrix(dir.join("L0.csv"), gt.l0.matrix())?;
        write_csv_matrix(dir.join("Y.csv"), &gt.y)?;
        write_csv_vector(dir.join("mu.csv"), &gt.mu)?;
    }
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}
