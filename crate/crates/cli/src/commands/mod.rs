pub mod bias_prior;
pub mod bounds;
pub mod sample;
pub mod scree;
pub mod simulate;

use serde_json::{json, Value};
use std::path::Path;

use crate::errors::Result;
use crate::io::write_json;

/// Every command records its full configuration and seeds next to its
/// outputs so a run can be reproduced exactly.
pub fn write_metadata(
    out_dir: &Path,
    command: &str,
    config: Value,
    outputs: &[&str],
) -> Result<()> {
    let meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "rng_algorithm": partialid::rng::ALGORITHM_ID,
        "config": config,
        "outputs": outputs,
    });
    write_json(&out_dir.join("metadata.json"), &meta)
}

pub fn float_vec(v: &nalgebra::DVector<f64>) -> Vec<f64> {
    v.iter().cloned().collect()
}

pub fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().cloned().collect())
        .collect()
}
