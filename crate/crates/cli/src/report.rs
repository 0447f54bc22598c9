//! CSV emission for solve runs, diagnostics, and benchmarks.
//!
//! Schemas (header row included, '.' decimal separator):
//!
//! * solve: iter,loss_exp,loss_reg,loss_total,grad_norm,step_size,halvings,r_t,time_ms
//!   (step columns are empty on the iter-0 row; r_t empty without truth)
//! * diag:   section,name,value
//! * bench cells:  n,d,snapshot_median_ms,grad_median_ms,hessian_median_ms
//! * bench slopes: quantity,fixed,slope,points

use std::path::Path;

use nalgebra::DVector;

use levinv::diagnostics::{LipschitzReport, NormBoundReport, ScalingReport};
use levinv::error::{Error, Result};
use levinv::solver::TrackedRun;

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot open {}: {e}", path.display())))
}

fn finish(writer: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    writer
        .into_inner()
        .map_err(|e| Error::InvalidConfig(format!("cannot flush {}: {e}", path.display())))?
        .sync_all()?;
    Ok(())
}

pub fn write_run_csv(run: &TrackedRun, x_star: Option<&DVector<f64>>, path: &Path) -> Result<()> {
    let mut writer = csv_writer(path)?;
    writer
        .write_record([
            "iter",
            "loss_exp",
            "loss_reg",
            "loss_total",
            "grad_norm",
            "step_size",
            "halvings",
            "r_t",
            "time_ms",
        ])
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let distances = x_star.map(|star| run.distances(star));
    for t in 0..run.iterates.len() {
        let loss = &run.losses[t];
        let (step_size, halvings, time_ms) = if t == 0 {
            (String::new(), String::new(), String::new())
        } else {
            (
                format!("{}", run.step_sizes[t - 1]),
                format!("{}", run.halvings[t - 1]),
                format!("{:.3}", run.times_ms[t - 1]),
            )
        };
        let r_t = distances
            .as_ref()
            .map(|ds| format!("{}", ds[t]))
            .unwrap_or_default();
        writer
            .write_record([
                t.to_string(),
                format!("{}", loss.loss_exp),
                format!("{}", loss.loss_reg),
                format!("{}", loss.loss_total),
                format!("{}", run.grad_norms[t]),
                step_size,
                halvings,
                r_t,
                time_ms,
            ])
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    finish(writer, path)
}

pub fn write_diag_csv(
    lipschitz: &LipschitzReport,
    norms: &NormBoundReport,
    path: &Path,
) -> Result<()> {
    let mut writer = csv_writer(path)?;
    writer
        .write_record(["section", "name", "value"])
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut put = |section: &str, name: &str, value: String| {
        writer
            .write_record([section, name, &value])
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    };

    put("lipschitz", "pairs", lipschitz.pairs.to_string())?;
    put("lipschitz", "beta", format!("{}", lipschitz.beta))?;
    put("lipschitz", "radius_r", format!("{}", lipschitz.radius_r))?;
    put(
        "lipschitz",
        "sigma_min_ax_min",
        format!("{}", lipschitz.sigma_min_ax_min),
    )?;
    put(
        "lipschitz",
        "min_abs_s_min",
        format!("{}", lipschitz.min_abs_s_min),
    )?;
    put(
        "lipschitz",
        "max_hessian_ratio",
        format!("{}", lipschitz.max_hessian_ratio),
    )?;
    put(
        "lipschitz",
        "hessian_bound",
        format!("{}", lipschitz.hessian_bound),
    )?;
    put(
        "lipschitz",
        "reg_hessian_ratio",
        format!("{}", lipschitz.reg_hessian_ratio),
    )?;
    put(
        "lipschitz",
        "tightness_gap",
        format!("{}", lipschitz.tightness_gap),
    )?;
    put(
        "lipschitz",
        "within_bounds",
        lipschitz.within_bounds.to_string(),
    )?;
    for q in 0..6 {
        put(
            "lipschitz",
            &format!("term{}_ratio", q + 1),
            format!("{}", lipschitz.per_term_ratios[q]),
        )?;
        put(
            "lipschitz",
            &format!("term{}_bound", q + 1),
            format!("{}", lipschitz.per_term_bounds[q]),
        )?;
    }
    put(
        "basic",
        "s_map_ratio",
        format!("{}", lipschitz.basic.ratios.s_map),
    )?;
    put(
        "basic",
        "s_map_bound",
        format!("{}", lipschitz.basic.bounds.s_map),
    )?;
    put(
        "basic",
        "s_inv_ratio",
        format!("{}", lipschitz.basic.ratios.s_inv_map),
    )?;
    put(
        "basic",
        "s_inv_bound",
        format!("{}", lipschitz.basic.bounds.s_inv_map),
    )?;
    put(
        "basic",
        "a_of_x_ratio",
        format!("{}", lipschitz.basic.ratios.a_of_x),
    )?;
    put(
        "basic",
        "a_of_x_bound",
        format!("{}", lipschitz.basic.bounds.a_of_x),
    )?;
    put(
        "basic",
        "gram_inv_ratio",
        format!("{}", lipschitz.basic.ratios.gram_inv),
    )?;
    put(
        "basic",
        "gram_inv_bound",
        format!("{}", lipschitz.basic.bounds.gram_inv),
    )?;
    put(
        "basic",
        "sigma_ratio",
        format!("{}", lipschitz.basic.ratios.sigma),
    )?;
    put(
        "basic",
        "sigma_bound",
        format!("{}", lipschitz.basic.bounds.sigma),
    )?;
    put(
        "basic",
        "all_within",
        lipschitz.basic.all_within.to_string(),
    )?;

    put("norms", "beta", format!("{}", norms.beta))?;
    put("norms", "hypothesis_met", norms.hypothesis_met.to_string())?;
    put("norms", "sigma_norm", format!("{}", norms.sigma_norm))?;
    put(
        "norms",
        "sigma_diag_max",
        format!("{}", norms.sigma_diag_max),
    )?;
    put(
        "norms",
        "sigma_column_max",
        format!("{}", norms.sigma_column_max),
    )?;
    put("norms", "gram_inv_norm", format!("{}", norms.gram_inv_norm))?;
    put(
        "norms",
        "gram_inv_bound",
        format!("{}", norms.gram_inv_bound),
    )?;
    put("norms", "scaled_norm", format!("{}", norms.scaled_norm))?;
    put("norms", "pass", norms.pass.to_string())?;

    finish(writer, path)
}

pub fn write_bench_csvs(report: &ScalingReport, cells: &Path, slopes: &Path) -> Result<()> {
    let mut writer = csv_writer(cells)?;
    writer
        .write_record([
            "n",
            "d",
            "snapshot_median_ms",
            "grad_median_ms",
            "hessian_median_ms",
        ])
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    for row in &report.rows {
        writer
            .write_record([
                row.n.to_string(),
                row.d.to_string(),
                format!("{:.6}", row.snapshot_median_ms),
                format!("{:.6}", row.grad_median_ms),
                row.hessian_median_ms
                    .map(|ms| format!("{ms:.6}"))
                    .unwrap_or_default(),
            ])
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    finish(writer, cells)?;

    let mut writer = csv_writer(slopes)?;
    writer
        .write_record(["quantity", "fixed", "slope", "points"])
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    for fit in &report.grad_slope_vs_n {
        writer
            .write_record([
                "grad_time_vs_n".to_string(),
                format!("d={}", fit.fixed),
                format!("{:.4}", fit.slope),
                fit.points.to_string(),
            ])
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    for fit in &report.grad_slope_vs_d {
        writer
            .write_record([
                "grad_time_vs_d".to_string(),
                format!("n={}", fit.fixed),
                format!("{:.4}", fit.slope),
                fit.points.to_string(),
            ])
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    finish(writer, slopes)
}
