//! Data ingestion and atomic result emission.
//!
//! CSV dialect: comma separated, dot decimal, mandatory header row, UTF-8.
//! Output files are written to a temporary sibling and renamed into place so
//! readers never observe partial files.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use partialid::factor::TreatmentMatrix;
use partialid::mcmc::Dataset;

use crate::errors::{CliError, Result};

/// Treatments plus outcome loaded from one CSV file.
pub struct LoadedData {
    pub dataset: Dataset,
    pub treatment_names: Vec<String>,
    /// Column means removed from the treatments before analysis.
    pub treatment_means: Vec<f64>,
    /// Mean removed from the outcome.
    pub outcome_mean: f64,
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Io(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Io(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(CliError::Io(format!(
                "row {}: {} fields, expected {}",
                line + 2,
                record.len(),
                headers.len()
            )));
        }
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|_| CliError::Io(format!("row {}: non-numeric field", line + 2)))?);
    }
    if rows.is_empty() {
        return Err(CliError::Io("input has no data rows".to_string()));
    }
    Ok((headers, rows))
}

/// Load the treatment columns of a CSV, dropping the named column if it is
/// present. Columns are mean-centered; optionally also scaled to unit
/// standard deviation.
pub fn load_treatments(
    path: &Path,
    drop_col: Option<&str>,
    standardize: bool,
) -> Result<(TreatmentMatrix, Vec<String>)> {
    let (headers, rows) = read_table(path)?;
    let keep: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| (Some(h.as_str()) != drop_col).then_some(i))
        .collect();
    if keep.is_empty() {
        return Err(CliError::Config(
            "no treatment columns in input".to_string(),
        ));
    }
    let names: Vec<String> = keep.iter().map(|&i| headers[i].clone()).collect();
    let data = DMatrix::from_fn(rows.len(), keep.len(), |i, j| rows[i][keep[j]]);
    let tm = TreatmentMatrix::new(data, Some(names.clone())).map_err(CliError::from)?;
    let mut centered = tm.centered();
    if standardize {
        centered = centered.standardized().map_err(CliError::from)?;
    }
    Ok((centered, names))
}

/// Read a CSV with a header row; the named outcome column becomes the
/// outcome, every other column a treatment. Treatments and outcome are
/// mean-centered (the model is zero-mean).
pub fn load_csv(path: &Path, outcome_col: &str, standardize: bool) -> Result<LoadedData> {
    let (headers, rows) = read_table(path)?;
    let outcome_idx = headers
        .iter()
        .position(|h| h == outcome_col)
        .ok_or_else(|| {
            CliError::Config(format!(
                "outcome column '{outcome_col}' not found; header has: {}",
                headers.join(", ")
            ))
        })?;
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| i != outcome_idx).collect();
    if keep.is_empty() {
        return Err(CliError::Config(
            "no treatment columns in input".to_string(),
        ));
    }
    let treatment_names: Vec<String> = keep.iter().map(|&i| headers[i].clone()).collect();
    let data = DMatrix::from_fn(rows.len(), keep.len(), |i, j| rows[i][keep[j]]);
    let outcome: Vec<f64> = rows.iter().map(|r| r[outcome_idx]).collect();

    let tm = TreatmentMatrix::new(data, Some(treatment_names.clone())).map_err(CliError::from)?;
    let treatment_means: Vec<f64> = tm.column_means().iter().cloned().collect();
    let mut centered = tm.centered();
    if standardize {
        centered = centered.standardized().map_err(CliError::from)?;
    }
    let outcome_mean = outcome.iter().sum::<f64>() / outcome.len() as f64;
    let y = DVector::from_vec(outcome.iter().map(|v| v - outcome_mean).collect());
    let dataset = Dataset::new(centered, y).map_err(CliError::from)?;
    Ok(LoadedData {
        dataset,
        treatment_names,
        treatment_means,
        outcome_mean,
    })
}

/// Write bytes to `path` atomically (temporary file plus rename).
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Resolve the output directory: the flag wins, then the environment
/// variable `PARTIALID_OUT_DIR`, then the current directory.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("PARTIALID_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}
