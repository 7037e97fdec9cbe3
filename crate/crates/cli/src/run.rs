//! Dispatch from a validated config to the solvers, and artifact writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use inversa_core::logistic::{fit_logistic, generate_logistic_data, LossMode};
use inversa_core::metrics::{avg_rel_error, avg_rel_error_by_approx};
use inversa_core::optimize::SENTINEL;
use inversa_core::ode::{dp45_integrate, rk4_integrate, AdaptiveSettings, OdeProblem};
use inversa_core::pme::{
    estimate_beta, field_rel_l2, heat_sine_error, heat_solve, pme_solve_direct, write_field_csv, write_field_meta,
    BarenblattParams, FieldMeta, HeatScheme, PmeConfig,
};
use inversa_core::{Field, Grid, OptimizerReport};
use inversa_pinn::checkpoint::write_loss_history;
use inversa_pinn::experiments::PinnRun;
use inversa_pinn::loss::Exponent;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ReferenceSpec, Settings};

/// Environment variable that relocates all outputs.
pub const OUTPUT_ROOT_ENV: &str = "INVERSA_OUTPUT_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NotConverged,
}

/// What a run produced: its report and one summary table row.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub status: RunStatus,
    pub report: Value,
    pub header: Vec<String>,
    pub row: Vec<String>,
}

/// Table number format: scientific, 6 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.5e}")
}

/// Where a config's artifacts go: `output_dir` (or `results/<problem>`),
/// resolved against the output root when relative.
pub fn resolve_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    let dir = cfg.output_dir.clone().unwrap_or_else(|| {
        PathBuf::from("results").join(enum_name(&cfg.problem))
    });
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir,
    }
}

/// Writes through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Serialized name of a unit enum variant.
pub fn enum_name(v: &impl Serialize) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn strings<const N: usize>(items: [&str; N]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Runs the experiment and writes `report.json`, `table.csv` and the
/// problem's extra artifacts into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let summary = match &cfg.settings {
        Settings::LogisticDirect(s) => logistic_direct(s, out)?,
        Settings::LogisticInverse(s) => logistic_inverse(s, cfg.seed)?,
        Settings::PmeDirect(s) => pme_direct(s, out)?,
        Settings::PmeInverse(s) => pme_inverse(s)?,
        Settings::HeatBench(s) => heat_bench(s)?,
        Settings::PinnLogisticDirect(s) => pinn_report(&s.run()?, out, None, cfg.seed)?,
        Settings::PinnLogisticInverse(s) => {
            let truth = BTreeMap::from([("r".to_string(), s.params.r), ("K".to_string(), s.params.k)]);
            pinn_report(&s.run()?, out, Some(truth), cfg.seed)?
        }
        Settings::PinnPme(s) => {
            let run = s.run()?;
            let truth = matches!(s.exponent, Exponent::Trainable { .. }).then(|| BTreeMap::from([("beta".to_string(), 3.0)]));
            write_pinn_field(&run, s.delta, out)?;
            pinn_report(&run, out, truth, cfg.seed)?
        }
    };
    write_json(&out.join("report.json"), &json!({ "status": summary.status, "report": summary.report }))?;
    write_table(&out.join("table.csv"), &summary.header, std::slice::from_ref(&summary.row))?;
    Ok(summary)
}

fn logistic_direct(s: &crate::config::LogisticDirectSettings, out: &Path) -> Result<RunSummary> {
    let p = s.params;
    let prob = OdeProblem::new(|t: f64, y: f64| p.rhs(t, y), p.t0, s.t_end, p.p0)?;
    let rk4 = rk4_integrate(&prob, s.rk4_steps)?;
    let rk4_exact: Vec<f64> = rk4.times.iter().map(|&t| p.exact(t)).collect();
    let rk4_err = avg_rel_error(&rk4.values, &rk4_exact, s.rk4_steps)?;
    let settings = AdaptiveSettings::for_span(p.t0, s.t_end).with_tolerances(s.rtol, s.atol);
    let dp = dp45_integrate(&prob, &settings)?;
    let dp_exact: Vec<f64> = dp.times.iter().map(|&t| p.exact(t)).collect();
    let dp_err = avg_rel_error_by_approx(&dp.values, &dp_exact)?;

    let mut series = String::from("t,rk4,exact\n");
    for ((t, y), e) in rk4.times.iter().zip(&rk4.values).zip(&rk4_exact) {
        series.push_str(&format!("{t},{y},{e}\n"));
    }
    write_atomic(&out.join("series.csv"), series.as_bytes())?;

    let report = json!({
        "params": p,
        "rk4_steps": s.rk4_steps,
        "rk4_avg_rel_error": rk4_err,
        "dp45_steps": dp.len() - 1,
        "dp45_avg_rel_error": dp_err,
        "rtol": s.rtol,
        "atol": s.atol,
    });
    Ok(RunSummary {
        status: RunStatus::Ok,
        report,
        header: strings(["t_start", "t_end", "intervals", "K", "p0", "r", "rk4_rel_err", "dp45_rel_err"]),
        row: vec![
            p.t0.to_string(),
            s.t_end.to_string(),
            s.rk4_steps.to_string(),
            sci(p.k),
            sci(p.p0),
            sci(p.r),
            sci(rk4_err),
            sci(dp_err),
        ],
    })
}

fn optimizer_row(init: &[f64], rep: &OptimizerReport) -> (Vec<String>, Vec<String>) {
    let mut header = vec!["method".to_string()];
    let mut row = vec![rep.method.clone()];
    for (i, v) in init.iter().enumerate() {
        header.push(format!("init_{i}"));
        row.push(sci(*v));
    }
    header.push("iter".into());
    row.push(rep.iterations.to_string());
    for (i, v) in rep.params_hat.iter().enumerate() {
        header.push(format!("param_{i}"));
        row.push(sci(*v));
    }
    for (i, v) in rep.rel_errors.iter().enumerate() {
        header.push(format!("rel_err_{i}"));
        row.push(sci(*v));
    }
    header.extend(strings(["feval", "interp_error", "extrap_error", "converged", "stop"]));
    row.extend([
        sci(rep.feval),
        sci(rep.interp_error),
        sci(rep.extrap_error),
        rep.converged.to_string(),
        enum_name(&rep.stop),
    ]);
    (header, row)
}

fn optimizer_summary(init: &[f64], rep: OptimizerReport) -> Result<RunSummary> {
    let (header, row) = optimizer_row(init, &rep);
    // a sentinel-valued optimum means every trial solve failed
    let status = if rep.converged && rep.feval < SENTINEL { RunStatus::Ok } else { RunStatus::NotConverged };
    Ok(RunSummary { status, report: json!({ "init": init, "optimizer": rep }), header, row })
}

fn logistic_inverse(s: &crate::config::LogisticInverseSettings, seed: u64) -> Result<RunSummary> {
    let mut ds = generate_logistic_data(s.truth, s.t_start, s.t_end, s.m, s.noise, seed)?;
    ds.train_fraction = s.train_fraction;
    let init = s.initial_point();
    let mut opts = s.options.clone();
    if s.mode == LossMode::ROnly && opts.lower.is_none() {
        let (lo, hi) = inversa_core::logistic::default_bounds(LossMode::ROnly);
        opts.lower = Some(lo);
        opts.upper = Some(hi);
    }
    let rep = fit_logistic(&ds, s.mode, s.method, &init, &opts)?;
    optimizer_summary(&init, rep)
}

fn barenblatt_run(delta: f64, n: usize, dt: f64, t_end: f64, beta: f64) -> Result<(PmeConfig, BarenblattParams)> {
    let mut cfg = PmeConfig::reference(beta);
    cfg.x_grid = Grid::new(-1.0, 1.0, n)?;
    cfg.dt = dt;
    cfg.t_end = t_end;
    Ok((cfg, BarenblattParams { delta }))
}

fn pme_direct(s: &crate::config::PmeDirectSettings, out: &Path) -> Result<RunSummary> {
    let (mut cfg, b) = barenblatt_run(s.delta, s.n_intervals, s.dt, s.t_end, s.beta)?;
    cfg.newton_tol = s.newton_tol;
    cfg.newton_max_iter = s.newton_max_iter;
    cfg.jac_h = s.jac_h;
    cfg.validate()?;
    let ic = |x: f64| b.eval(0.0, x);
    let bc = |t: f64| (b.eval(t, -1.0), b.eval(t, 1.0));
    let field = pme_solve_direct(&cfg, ic, bc)?;
    write_field_csv(&out.join("field.csv"), &field)?;
    write_field_meta(
        &out.join("field_meta.json"),
        &FieldMeta {
            beta: s.beta,
            delta: Some(s.delta),
            t_grid: field.t_grid,
            x_grid: field.x_grid,
            dt: s.dt,
            scheme: "newton_implicit".into(),
        },
    )?;
    let exact = b.field(field.t_grid, field.x_grid);
    // the Barenblatt profile is an exact solution only for β = 3
    let rel_l2 = (s.beta == 3.0).then(|| field_rel_l2(&field, &exact)).transpose()?;
    let be_diff = if s.compare_backward_euler {
        let ic_v: Vec<f64> = cfg.x_grid.points().into_iter().map(ic).collect();
        let heat = heat_solve(HeatScheme::BackwardEuler, &ic_v, cfg.x_grid, cfg.dt, cfg.t_end, bc, false)?;
        Some(field.values.iter().zip(&heat.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    let newton_total: usize = field.status.newton_iterations.iter().sum();
    let stalled = field.status.stalled_steps.len();
    let report = json!({
        "beta": s.beta,
        "delta": s.delta,
        "rel_l2": rel_l2,
        "max_abs_diff_backward_euler": be_diff,
        "newton_iterations": newton_total,
        "stalled_steps": field.status.stalled_steps,
        "diverged": field.status.diverged,
    });
    let opt = |v: Option<f64>| v.map(sci).unwrap_or_default();
    Ok(RunSummary {
        status: if stalled == 0 && !field.status.diverged { RunStatus::Ok } else { RunStatus::NotConverged },
        report,
        header: strings(["beta", "delta", "rel_l2", "max_abs_diff_backward_euler", "newton_iterations", "stalled_steps"]),
        row: vec![s.beta.to_string(), s.delta.to_string(), opt(rel_l2), opt(be_diff), newton_total.to_string(), stalled.to_string()],
    })
}

fn reference_field(spec: &ReferenceSpec) -> Result<(Field, f64)> {
    match *spec {
        ReferenceSpec::Barenblatt { delta, n_intervals, dt, t_end } => {
            let (cfg, b) = barenblatt_run(delta, n_intervals, dt, t_end, 3.0)?;
            let t_grid = Grid::new(0.0, cfg.t_end, (cfg.t_end / cfg.dt).round() as usize)?;
            Ok((b.field(t_grid, cfg.x_grid), 3.0))
        }
        ReferenceSpec::Ftcs(bench) => {
            let field = bench.solve()?;
            anyhow::ensure!(!field.status.diverged, "FTCS reference diverged at beta = {}", bench.beta);
            Ok((field, bench.beta))
        }
    }
}

fn pme_inverse(s: &crate::config::PmeInverseSettings) -> Result<RunSummary> {
    let (reference, truth) = reference_field(&s.reference)?;
    let rep = estimate_beta(&reference, s.beta0, (s.bounds[0], s.bounds[1]), &s.solver, s.method, Some(truth), &s.options)?;
    optimizer_summary(&[s.beta0], rep)
}

fn heat_bench(s: &crate::config::HeatBenchSettings) -> Result<RunSummary> {
    let mut schemes = Vec::new();
    let mut header = Vec::new();
    let mut row = Vec::new();
    for &scheme in &s.schemes {
        let name = enum_name(&scheme);
        let taus: Vec<f64> = (0..s.levels).map(|l| s.tau / 2f64.powi(l as i32)).collect();
        let errors = taus.iter().map(|&tau| heat_sine_error(scheme, s.n_intervals, tau, s.t_end)).collect::<inversa_core::Result<Vec<f64>>>()?;
        let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
        for (i, r) in ratios.iter().enumerate() {
            header.push(format!("{name}_ratio_{i}"));
            row.push(sci(*r));
        }
        schemes.push(json!({ "scheme": name, "taus": taus, "errors": errors, "ratios": ratios }));
    }
    let g = Grid::new(0.0, 1.0, s.n_intervals)?;
    let ic: Vec<f64> = g.points().iter().map(|x| (std::f64::consts::PI * x).sin()).collect();
    let mut fe = Vec::new();
    for &factor in &s.fe_factors {
        let tau = factor * g.h * g.h;
        let f = heat_solve(HeatScheme::ForwardEuler, &ic, g, tau, tau * s.fe_steps as f64, |_| (0.0, 0.0), true)?;
        let max_abs = f.values.iter().fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
        header.push(format!("fe_{factor}_diverged"));
        row.push(f.status.diverged.to_string());
        fe.push(json!({ "factor": factor, "tau": tau, "diverged": f.status.diverged, "max_abs": max_abs }));
    }
    Ok(RunSummary { status: RunStatus::Ok, report: json!({ "schemes": schemes, "forward_euler": fe }), header, row })
}

fn pinn_report(run: &PinnRun, out: &Path, truth: Option<BTreeMap<String, f64>>, seed: u64) -> Result<RunSummary> {
    write_loss_history(&out.join("loss_history.csv"), &run.train.history)?;
    run.checkpoint.save(&out.join("model.json"))?;
    let mut preds = String::from(if run.eval_points.first().map_or(1, Vec::len) == 1 { "t,predicted,exact\n" } else { "t,x,predicted,exact\n" });
    if run.eval_points.len() <= 1000 {
        for ((p, a), e) in run.eval_points.iter().zip(&run.predicted).zip(&run.exact) {
            let coords: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            preds.push_str(&format!("{},{a},{e}\n", coords.join(",")));
        }
        write_atomic(&out.join("predictions.csv"), preds.as_bytes())?;
    }
    let rel = |m: &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        let Some(t) = &truth else { return BTreeMap::new() };
        m.iter().filter_map(|(k, v)| t.get(k).map(|tv| (k.clone(), ((v - tv) / tv).abs()))).collect()
    };
    let scalar_rel = rel(&run.scalars);
    let report = json!({
        "seed": seed,
        "rel_l2": run.rel_l2,
        "rel_l2_adam": run.rel_l2_adam,
        "scalars": run.scalars,
        "scalars_adam": run.scalars_adam,
        "scalar_rel_errors": scalar_rel,
        "scalar_rel_errors_adam": rel(&run.scalars_adam),
        "final_loss": run.train.final_state.loss,
        "adam_loss": run.train.after_adam.loss,
        "loss_terms": run.train.terms,
        "epochs": run.train.history.len(),
        "lbfgs_stop": run.train.lbfgs_stop,
        "aborted": run.train.aborted,
        "wall_time_s": run.train.wall_time_s,
    });
    let mut header = strings(["seed", "rel_l2", "rel_l2_adam", "final_loss"]);
    let mut row = vec![seed.to_string(), sci(run.rel_l2), sci(run.rel_l2_adam), sci(run.train.final_state.loss)];
    for (k, v) in &run.scalars {
        header.push(k.clone());
        row.push(sci(*v));
        if let Some(e) = scalar_rel.get(k) {
            header.push(format!("{k}_rel_err"));
            row.push(sci(*e));
        }
    }
    let status = if run.train.aborted.is_some() { RunStatus::NotConverged } else { RunStatus::Ok };
    Ok(RunSummary { status, report, header, row })
}

/// Network prediction on the finite-difference reference grid, for heatmaps.
fn write_pinn_field(run: &PinnRun, delta: f64, out: &Path) -> Result<()> {
    let t_grid = Grid::new(0.0, 1.0, 100)?;
    let x_grid = Grid::new(-1.0, 1.0, 100)?;
    let net = &run.train.final_state.net;
    let field = Field::from_fn(t_grid, x_grid, |t, x| net.value(&[t, x]));
    write_field_csv(&out.join("field.csv"), &field)?;
    write_field_meta(
        &out.join("field_meta.json"),
        &FieldMeta {
            beta: run.scalars.get("beta").copied().unwrap_or(3.0),
            delta: Some(delta),
            t_grid,
            x_grid,
            dt: t_grid.h,
            scheme: "pinn".into(),
        },
    )?;
    Ok(())
}

/// Removes every `wall_time_s` entry, leaving what must be reproducible.
pub fn strip_timing(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.remove("wall_time_s");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_fields_removed_at_any_depth() {
        let mut v = json!({"wall_time_s": 1.0, "a": [{"wall_time_s": 2, "b": 3}], "c": {"wall_time_s": null}});
        strip_timing(&mut v);
        assert_eq!(v, json!({"a": [{"b": 3}], "c": {}}));
    }

    #[test]
    fn numbers_in_tables_have_six_digits() {
        assert_eq!(sci(4.164e-3), "4.16400e-3");
        assert_eq!(sci(1e10), "1.00000e10");
    }
}
