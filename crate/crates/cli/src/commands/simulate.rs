use nalgebra::{DMatrix, DVector};
use partialid::sim::{generate, DgpConfig, DgpVariant, LoadingPattern};
use serde_json::json;

use crate::commands::{float_vec, matrix_rows, write_metadata};
use crate::errors::{CliError, Result};
use crate::io::{resolve_out_dir, write_atomic, write_json};
use crate::{SimulateArgs, VariantArg};

pub fn run(args: SimulateArgs) -> Result<()> {
    let out_dir = resolve_out_dir(args.out_dir.clone());
    let variant = match args.variant {
        VariantArg::NullEffects => DgpVariant::NullEffects,
        VariantArg::NoConfounding => DgpVariant::NoConfounding,
        VariantArg::OppositeBias => DgpVariant::OppositeBias,
    };
    let (loading_pattern, m) = match &args.loadings {
        None => (LoadingPattern::TwoBlock, 2),
        Some(path) => {
            let m = args
                .m
                .ok_or_else(|| CliError::Config("--m is required with --loadings".to_string()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("loadings file: {e}")))?;
            if rows.len() != args.k || rows.iter().any(|r| r.len() != m) {
                return Err(CliError::Config(format!(
                    "loadings must be {} rows of {m} numbers",
                    args.k
                )));
            }
            let b = DMatrix::from_fn(args.k, m, |i, j| rows[i][j]);
            (LoadingPattern::Custom(b), m)
        }
    };
    let beta_true = match &args.beta_true {
        None => DVector::zeros(args.k),
        Some(v) => {
            if v.len() != args.k {
                return Err(CliError::Config(format!(
                    "--beta-true has {} entries for k={}",
                    v.len(),
                    args.k
                )));
            }
            DVector::from_vec(v.clone())
        }
    };
    let cfg = DgpConfig {
        n: args.n,
        k: args.k,
        m,
        beta_true,
        r2_target: args.r2,
        loading_pattern,
        variant,
        seed: args.seed,
    };
    let (ds, truth) = generate(&cfg).map_err(CliError::from)?;

    // dataset CSV: t_1..t_k, y
    let mut csv = String::new();
    let names: Vec<String> = (1..=args.k).map(|j| format!("t_{j}")).collect();
    csv.push_str(&names.join(","));
    csv.push_str(",y\n");
    let data = ds.treatments().data();
    for i in 0..ds.n() {
        for j in 0..args.k {
            csv.push_str(&format!("{},", data[(i, j)]));
        }
        csv.push_str(&format!("{}\n", ds.outcome()[i]));
    }
    write_atomic(&out_dir.join("dataset.csv"), csv.as_bytes())?;

    let truth_json = json!({
        "loadings": matrix_rows(truth.factor.loadings()),
        "sigma2_t_u": truth.factor.noise_var(),
        "beta": float_vec(&truth.outcome.beta),
        "gamma": float_vec(&truth.outcome.gamma),
        "sigma2_y_tu": truth.outcome.sigma2_y_tu,
        "beta_check": float_vec(&truth.beta_check),
        "sigma2_y_t": truth.sigma2_y_t,
        "r2_target": args.r2,
        "variant": format!("{:?}", variant),
        "seed": args.seed,
    });
    write_json(&out_dir.join("truth.json"), &truth_json)?;

    let config = json!({
        "n": args.n, "k": args.k, "m": m, "r2": args.r2,
        "variant": format!("{:?}", variant),
        "beta_true": args.beta_true,
        "custom_loadings": args.loadings.is_some(),
        "seed": args.seed,
    });
    write_metadata(&out_dir, "simulate", config, &["dataset.csv", "truth.json"])?;
    println!(
        "wrote {} rows to {}",
        ds.n(),
        out_dir.join("dataset.csv").display()
    );
    Ok(())
}
