use partialid::factor::fit_ppca;
use partialid::mcmc::ols;
use partialid::model::confounder_posterior;
use partialid::prior::{beta_bias_cdf, bias_prior_draws, worst_case_half_width};
use partialid::stats::{ks_critical, ks_statistic};
use partialid::RngStream;
use serde_json::json;

use crate::commands::write_metadata;
use crate::errors::{CliError, Result};
use crate::io::{load_csv, resolve_out_dir, write_atomic, write_json};
use crate::spec::load_contrasts;
use crate::BiasPriorArgs;

pub fn run(args: BiasPriorArgs) -> Result<()> {
    let out_dir = resolve_out_dir(args.out_dir.clone());
    if args.m < 2 {
        return Err(CliError::Config(
            "the bias law needs at least 2 confounders".to_string(),
        ));
    }
    let loaded = load_csv(&args.input, &args.outcome_col, args.standardize)?;
    let ds = &loaded.dataset;
    let fit = ols(ds.treatments().data(), ds.outcome()).map_err(CliError::from)?;
    let sigma2 = fit.resid_var();
    let fm = fit_ppca(ds.treatments(), args.m).map_err(CliError::from)?;
    let cp = confounder_posterior(&fm).map_err(CliError::from)?;
    let contrasts = load_contrasts(&args.contrasts, ds.k())?;

    let mut reports = Vec::new();
    let mut outputs: Vec<String> = Vec::new();
    for (idx, (id, contrast)) in contrasts.iter().enumerate() {
        let stream = RngStream::new(args.seed).substream(idx as u64);
        let mut sample = bias_prior_draws(&cp, contrast, sigma2, args.r2, args.draws, stream)
            .map_err(CliError::from)?;
        sample.contrast_id = Some(id.clone());
        let half_width =
            worst_case_half_width(&cp, contrast, sigma2, args.r2).map_err(CliError::from)?;

        // single-column CSV with a metadata header
        let mut csv = format!(
            "# m={}\n# r2={}\n# contrast_id={}\n# seed={}\nbias\n",
            sample.m, sample.r2, id, sample.seed
        );
        for d in &sample.draws {
            csv.push_str(&format!("{d}\n"));
        }
        let file = format!("bias_draws_{id}.csv");
        write_atomic(&out_dir.join(&file), csv.as_bytes())?;
        outputs.push(file);

        let (ks, crit, pass) = if half_width > 0.0 {
            let ks = ks_statistic(&sample.draws, |x| {
                beta_bias_cdf(x, args.m, half_width).unwrap_or(f64::NAN)
            });
            let crit = ks_critical(0.01, args.draws);
            (Some(ks), Some(crit), Some(ks < crit))
        } else {
            // degenerate contrast: all draws are exactly zero
            (None, None, None)
        };
        reports.push(json!({
            "contrast_id": id,
            "m": args.m,
            "r2": args.r2,
            "n_draws": args.draws,
            "half_width": half_width,
            "ks_statistic": ks,
            "ks_critical_alpha_01": crit,
            "pass": pass,
        }));
    }
    write_json(&out_dir.join("ks.json"), &json!({"contrasts": reports}))?;
    outputs.push("ks.json".to_string());

    let config = json!({
        "input": args.input.display().to_string(),
        "outcome_col": args.outcome_col,
        "m": args.m,
        "r2": args.r2,
        "contrasts": args.contrasts.display().to_string(),
        "draws": args.draws,
        "seed": args.seed,
        "standardize": args.standardize,
    });
    let output_refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    write_metadata(&out_dir, "bias-prior", config, &output_refs)?;
    println!(
        "wrote {} bias samples to {}",
        contrasts.len(),
        out_dir.display()
    );
    Ok(())
}
