use nalgebra::DVector;
use partialid::bounds::{
    nc_compatible, nc_geometry, nc_interval, project_tau_check, r2_min, width_reduction,
    worst_case_interval, ContrastSet, NcGeometry,
};
use partialid::factor::fit_ppca;
use partialid::mcmc::ols;
use partialid::model::{confounder_posterior, ConfounderPosterior, Contrast};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::commands::write_metadata;
use crate::errors::{CliError, Result};
use crate::io::{load_csv, resolve_out_dir, write_json};
use crate::spec::{load_contrasts, NcSpec};
use crate::BoundsArgs;

struct NcContext {
    geo: NcGeometry,
    tau_used: DVector<f64>,
    compatible: bool,
    residual_norm: f64,
    r2_min: f64,
}

pub fn run(args: BoundsArgs) -> Result<()> {
    let out_dir = resolve_out_dir(args.out_dir.clone());
    let loaded = load_csv(&args.input, &args.outcome_col, args.standardize)?;
    let ds = &loaded.dataset;
    let k = ds.k();
    let fit = ols(ds.treatments().data(), ds.outcome()).map_err(CliError::from)?;
    let sigma2 = fit.resid_var();
    let fm = fit_ppca(ds.treatments(), args.m).map_err(CliError::from)?;
    let cp = confounder_posterior(&fm).map_err(CliError::from)?;

    let contrasts = load_contrasts(&args.contrasts, k)?;
    let grid = if args.r2.is_empty() {
        (0..=10).map(|i| i as f64 / 10.0).collect()
    } else {
        let mut g = args.r2.clone();
        if let Some(bad) = g.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CliError::Config(format!("--r2 {bad} outside [0,1]")));
        }
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g
    };

    let nc = match &args.nc_spec {
        None => None,
        Some(path) => {
            let spec = NcSpec::load(path)?;
            let nc_contrasts = spec.as_contrasts(k)?;
            let tau = DVector::from_fn(nc_contrasts.len(), |j, _| {
                fit.coef.dot(&nc_contrasts[j].1.delta())
            });
            let flags = vec![true; nc_contrasts.len()];
            let set = ContrastSet::new(nc_contrasts.into_iter().map(|(_, c)| c).collect(), flags)
                .map_err(CliError::from)?;
            let geo = nc_geometry(&cp, &set).map_err(CliError::from)?;
            let (compatible, residual_norm) = nc_compatible(&geo, &tau, args.tol);
            // an incompatible spec is diagnostic, not fatal: continue with
            // the row-space projection and flag every record
            let tau_used = if compatible {
                tau
            } else {
                project_tau_check(&geo, &tau)
            };
            let r2_floor = r2_min(&geo, &tau_used, sigma2).map_err(CliError::from)?;
            if r2_floor > 1.0 {
                return Err(CliError::Infeasible(format!(
                    "controls require a confounding fraction of {r2_floor:.4} > 1; \
                     no factor-model confounding can explain them"
                )));
            }
            Some(NcContext {
                geo,
                tau_used,
                compatible,
                residual_norm,
                r2_min: r2_floor,
            })
        }
    };

    let records: Result<Vec<Vec<Value>>> = contrasts
        .par_iter()
        .map(|(id, contrast)| {
            grid.iter()
                .map(|&r2| bound_record(id, contrast, r2, &cp, &fit.coef, sigma2, nc.as_ref()))
                .collect()
        })
        .collect();
    let records: Vec<Value> = records?.into_iter().flatten().collect();

    // robustness: smallest grid fraction whose effect interval covers zero
    let robustness: Vec<Value> = contrasts
        .iter()
        .map(|(id, _)| {
            let smallest = records
                .iter()
                .filter(|r| r["contrast_id"] == json!(id) && r["infeasible"] == json!(false))
                .find(|r| {
                    let lo = r["pate_lo"].as_f64().unwrap();
                    let hi = r["pate_hi"].as_f64().unwrap();
                    lo <= 0.0 && 0.0 <= hi
                })
                .map(|r| r["r2"].clone())
                .unwrap_or(Value::Null);
            json!({"contrast_id": id, "smallest_r2_covering_zero": smallest})
        })
        .collect();

    let nc_summary = nc.as_ref().map(|ctx| {
        json!({
            "count": ctx.geo.n_controls(),
            "rank": ctx.geo.rank(),
            "compatible": ctx.compatible,
            "residual_norm": ctx.residual_norm,
            "r2_min": ctx.r2_min,
        })
    });
    let out = json!({
        "records": records,
        "robustness": robustness,
        "negative_controls": nc_summary,
        "sigma2_y_t": sigma2,
        "naive_coefficients": crate::commands::float_vec(&fit.coef),
    });
    write_json(&out_dir.join("bounds.json"), &out)?;

    let config = json!({
        "input": args.input.display().to_string(),
        "outcome_col": args.outcome_col,
        "m": args.m,
        "r2_grid": grid,
        "contrasts": args.contrasts.display().to_string(),
        "nc_spec": args.nc_spec.as_ref().map(|p| p.display().to_string()),
        "standardize": args.standardize,
        "tol": args.tol,
        "treatment_names": loaded.treatment_names,
        "treatment_means": loaded.treatment_means,
        "outcome_mean": loaded.outcome_mean,
    });
    write_metadata(&out_dir, "bounds", config, &["bounds.json"])?;
    println!(
        "wrote {} records to {}",
        records.len(),
        out_dir.join("bounds.json").display()
    );
    Ok(())
}

fn bound_record(
    id: &str,
    contrast: &Contrast,
    r2: f64,
    cp: &ConfounderPosterior,
    coef: &DVector<f64>,
    sigma2: f64,
    nc: Option<&NcContext>,
) -> Result<Value> {
    let naive = coef.dot(&contrast.delta());
    let (interval, r2_floor, compatible, residual) = match nc {
        None => (
            Some(worst_case_interval(cp, contrast, sigma2, r2, naive).map_err(CliError::from)?),
            0.0,
            true,
            0.0,
        ),
        Some(ctx) => {
            let iv = if r2 + 1e-12 >= ctx.r2_min {
                Some(
                    nc_interval(&ctx.geo, cp, contrast, &ctx.tau_used, sigma2, r2, naive)
                        .map_err(CliError::from)?,
                )
            } else {
                None
            };
            (iv, ctx.r2_min, ctx.compatible, ctx.residual_norm)
        }
    };
    let width_factor = match nc {
        None => Some(1.0),
        Some(ctx) => {
            if r2 > 0.0 && r2 + 1e-12 >= ctx.r2_min {
                width_reduction(&ctx.geo, cp, contrast, r2, ctx.r2_min.min(r2)).ok()
            } else {
                None
            }
        }
    };
    Ok(match interval {
        Some(iv) => {
            let (lo, hi) = iv.pate();
            json!({
                "contrast_id": id,
                "naive_effect": naive,
                "r2": r2,
                "center": iv.center,
                "half_width": iv.half_width,
                "pate_lo": lo,
                "pate_hi": hi,
                "r2_min": r2_floor,
                "width_factor": width_factor,
                "compatible": compatible,
                "residual_norm": residual,
                "infeasible": false,
            })
        }
        None => json!({
            "contrast_id": id,
            "naive_effect": naive,
            "r2": r2,
            "center": Value::Null,
            "half_width": Value::Null,
            "pate_lo": Value::Null,
            "pate_hi": Value::Null,
            "r2_min": r2_floor,
            "width_factor": Value::Null,
            "compatible": compatible,
            "residual_norm": residual,
            "infeasible": true,
        }),
    })
}
