//! JSON specifications for contrasts and negative controls.
//!
//! A contrast entry is either explicit arms or the shorthand
//! `{"treatment": i, "delta": x}` meaning "treatment `i` (1-based) set to
//! `x`, all others zero, against the all-zero baseline".

use std::path::Path;

use nalgebra::DVector;
use partialid::model::Contrast;
use serde::Deserialize;

use crate::errors::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ContrastEntry {
    Explicit {
        #[serde(default)]
        id: Option<String>,
        t1: Vec<f64>,
        t2: Vec<f64>,
    },
    Shorthand {
        #[serde(default)]
        id: Option<String>,
        /// 1-based treatment index.
        treatment: usize,
        delta: f64,
    },
}

impl ContrastEntry {
    pub fn resolve(&self, k: usize, fallback_id: &str) -> Result<(String, Contrast)> {
        match self {
            ContrastEntry::Explicit { id, t1, t2 } => {
                if t1.len() != k || t2.len() != k {
                    return Err(CliError::Config(format!(
                        "contrast '{}' has arms of length {}/{}, data has {k} treatments",
                        id.clone().unwrap_or_else(|| fallback_id.to_string()),
                        t1.len(),
                        t2.len()
                    )));
                }
                let contrast =
                    Contrast::new(DVector::from_vec(t1.clone()), DVector::from_vec(t2.clone()))
                        .map_err(CliError::from)?;
                Ok((
                    id.clone().unwrap_or_else(|| fallback_id.to_string()),
                    contrast,
                ))
            }
            ContrastEntry::Shorthand {
                id,
                treatment,
                delta,
            } => {
                if *treatment == 0 || *treatment > k {
                    return Err(CliError::Config(format!(
                        "treatment index {treatment} out of range 1..={k}"
                    )));
                }
                let contrast =
                    Contrast::coordinate(treatment - 1, *delta, k).map_err(CliError::from)?;
                let name = id
                    .clone()
                    .unwrap_or_else(|| format!("t{treatment}_delta{delta}"));
                Ok((name, contrast))
            }
        }
    }
}

pub fn load_contrasts(path: &Path, k: usize) -> Result<Vec<(String, Contrast)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let entries: Vec<ContrastEntry> =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("contrast spec: {e}")))?;
    if entries.is_empty() {
        return Err(CliError::Config("contrast spec is empty".to_string()));
    }
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| e.resolve(k, &format!("c{i}")))
        .collect()
}

/// Negative-control specification: either plain treatment indices (expanded
/// to unit coordinate contrasts) or full contrast entries.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NcSpec {
    /// 1-based treatment indices assumed to have no effect.
    #[serde(default)]
    pub treatments: Vec<usize>,
    /// Arbitrary contrasts assumed to have zero effect.
    #[serde(default)]
    pub contrasts: Vec<ContrastEntry>,
}

impl NcSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let spec: NcSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("negative-control spec: {e}")))?;
        if spec.treatments.is_empty() && spec.contrasts.is_empty() {
            return Err(CliError::Config(
                "negative-control spec names no treatments or contrasts".to_string(),
            ));
        }
        Ok(spec)
    }

    /// Zero-based treatment indices; errors if the spec uses full contrasts
    /// (the samplers constrain coordinate effects only).
    pub fn indices(&self, k: usize) -> Result<Vec<usize>> {
        if !self.contrasts.is_empty() {
            return Err(CliError::Config(
                "this command supports only treatment-index negative controls".to_string(),
            ));
        }
        self.treatments
            .iter()
            .map(|&t| {
                if t == 0 || t > k {
                    Err(CliError::Config(format!(
                        "control index {t} out of range 1..={k}"
                    )))
                } else {
                    Ok(t - 1)
                }
            })
            .collect()
    }

    /// All controls as contrasts (indices become unit coordinate contrasts).
    pub fn as_contrasts(&self, k: usize) -> Result<Vec<(String, Contrast)>> {
        let mut out = Vec::new();
        for &t in &self.treatments {
            if t == 0 || t > k {
                return Err(CliError::Config(format!(
                    "control index {t} out of range 1..={k}"
                )));
            }
            out.push((
                format!("nc_t{t}"),
                Contrast::coordinate(t - 1, 1.0, k).map_err(CliError::from)?,
            ));
        }
        for (i, entry) in self.contrasts.iter().enumerate() {
            out.push(entry.resolve(k, &format!("nc{i}"))?);
        }
        Ok(out)
    }
}
