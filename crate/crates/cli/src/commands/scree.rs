use partialid::factor::scree;
use serde_json::json;

use crate::commands::write_metadata;
use crate::errors::Result;
use crate::io::{load_treatments, resolve_out_dir, write_atomic};
use crate::ScreeArgs;

pub fn run(args: ScreeArgs) -> Result<()> {
    let out_dir = resolve_out_dir(args.out_dir.clone());
    let (tm, names) = load_treatments(&args.input, args.outcome_col.as_deref(), args.standardize)?;
    let result = scree(&tm)?;

    let mut csv = String::from("rank,eigenvalue,cumulative_fraction\n");
    for (i, (eig, frac)) in result
        .eigenvalues
        .iter()
        .zip(&result.cumulative_fraction)
        .enumerate()
    {
        csv.push_str(&format!("{},{},{}\n", i + 1, eig, frac));
    }
    write_atomic(&out_dir.join("scree.csv"), csv.as_bytes())?;

    let config = json!({
        "input": args.input.display().to_string(),
        "outcome_col": args.outcome_col,
        "standardize": args.standardize,
        "columns": names,
    });
    write_metadata(&out_dir, "scree", config, &["scree.csv"])?;
    println!(
        "wrote spectrum of {} columns to {}",
        result.eigenvalues.len(),
        out_dir.join("scree.csv").display()
    );
    Ok(())
}
