use partialid::factor::fit_ppca;
use partialid::mcmc::{run_chains, summarize, PriorRegime};
use partialid::RngStream;
use serde_json::{json, Map};

use crate::commands::write_metadata;
use crate::errors::{CliError, Result};
use crate::io::{load_csv, resolve_out_dir, write_atomic, write_json};
use crate::spec::NcSpec;
use crate::{RegimeArg, SampleArgs};

pub fn run(args: SampleArgs) -> Result<()> {
    let out_dir = resolve_out_dir(args.out_dir.clone());
    let loaded = load_csv(&args.input, &args.outcome_col, args.standardize)?;
    let ds = &loaded.dataset;
    let k = ds.k();
    let fm = fit_ppca(ds.treatments(), args.m).map_err(CliError::from)?;
    let warmup = args.warmup.unwrap_or(args.iters / 2);

    let nc_indices = match &args.nc_spec {
        Some(path) => Some(NcSpec::load(path)?.indices(k)?),
        None => None,
    };
    let mut regime = match args.regime {
        RegimeArg::FlatGamma => PriorRegime::flat_gamma(),
        RegimeArg::R2Uniform => PriorRegime::r2_uniform(args.r2_upper),
        RegimeArg::NegativeControl => PriorRegime::negative_control(
            nc_indices.clone().ok_or_else(|| {
                CliError::Config("--nc-spec is required for the negative-control regime".into())
            })?,
            args.r2_upper,
        ),
        RegimeArg::Horseshoe => PriorRegime::horseshoe(args.r2_upper),
        RegimeArg::HorseshoeNc => PriorRegime::horseshoe_nc(
            nc_indices.clone().ok_or_else(|| {
                CliError::Config("--nc-spec is required for the horseshoe-nc regime".into())
            })?,
            args.r2_upper,
        ),
    };
    regime.horseshoe_scale = args.horseshoe_scale;
    regime.horseshoe_slab = args.horseshoe_slab;

    let draws = run_chains(
        ds,
        &fm,
        &regime,
        args.iters,
        warmup,
        args.chains,
        RngStream::new(args.seed),
    )
    .map_err(CliError::from)?;

    // draws CSV
    let m = draws.n_confounders();
    let mut header: Vec<String> = (1..=k).map(|j| format!("beta_{j}")).collect();
    header.extend((1..=m).map(|j| format!("gamma_{j}")));
    header.extend([
        "r2".to_string(),
        "sigma2".to_string(),
        "chain".to_string(),
        "iter".to_string(),
    ]);
    let mut csv = header.join(",");
    csv.push('\n');
    for i in 0..draws.n_draws() {
        for j in 0..k {
            csv.push_str(&format!("{},", draws.beta[(i, j)]));
        }
        for j in 0..m {
            csv.push_str(&format!("{},", draws.gamma[(i, j)]));
        }
        csv.push_str(&format!(
            "{},{},{},{}\n",
            draws.r2[i], draws.sigma2_y_t[i], draws.chain_id[i], draws.iteration[i]
        ));
    }
    write_atomic(&out_dir.join("draws.csv"), csv.as_bytes())?;

    // pointwise log likelihood CSV
    let n = ds.n();
    let ll_header: Vec<String> = (1..=n).map(|j| format!("obs_{j}")).collect();
    let mut ll_csv = ll_header.join(",");
    ll_csv.push('\n');
    for i in 0..draws.n_draws() {
        let row: Vec<String> = (0..n)
            .map(|j| format!("{}", draws.pointwise_loglik[(i, j)]))
            .collect();
        ll_csv.push_str(&row.join(","));
        ll_csv.push('\n');
    }
    write_atomic(&out_dir.join("loglik.csv"), ll_csv.as_bytes())?;

    // summary JSON: per-parameter moments, intervals, significance flags
    let mut params = Map::new();
    for s in summarize(&draws) {
        params.insert(
            s.name.clone(),
            json!({
                "mean": s.mean,
                "q025": s.q025,
                "q500": s.q500,
                "q975": s.q975,
                "significant": s.significant,
            }),
        );
    }
    let summary = json!({
        "parameters": params,
        "n_draws": draws.n_draws(),
        "chains": args.chains,
        "rejected_updates": draws.rejected_updates,
        "nc_projected": draws.nc_projected,
        "nc_residual_norm": draws.nc_residual_norm,
        "regime": format!("{:?}", regime.kind),
    });
    write_json(&out_dir.join("summary.json"), &summary)?;

    let config = json!({
        "input": args.input.display().to_string(),
        "outcome_col": args.outcome_col,
        "m": args.m,
        "regime": format!("{:?}", regime.kind),
        "iters": args.iters,
        "warmup": warmup,
        "chains": args.chains,
        "seed": args.seed,
        "r2_upper": args.r2_upper,
        "nc_indices": nc_indices,
        "horseshoe_scale": args.horseshoe_scale,
        "horseshoe_slab": args.horseshoe_slab,
        "standardize": args.standardize,
        "treatment_names": loaded.treatment_names,
        "treatment_means": loaded.treatment_means,
        "outcome_mean": loaded.outcome_mean,
    });
    write_metadata(
        &out_dir,
        "sample",
        config,
        &["draws.csv", "summary.json", "loglik.csv"],
    )?;
    println!(
        "wrote {} draws ({} chains) to {}",
        draws.n_draws(),
        args.chains,
        out_dir.join("draws.csv").display()
    );
    Ok(())
}
