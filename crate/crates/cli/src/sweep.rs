//! One-axis parameter sweeps over a config template.

use std::path::Path;

use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::parse_config;
use crate::run::{run_experiment, write_json, write_table, RunStatus};

/// `name=v1,v2,...` with a dotted path into the config (`settings.beta0`).
pub fn parse_axis(spec: &str) -> Result<(String, Vec<Value>)> {
    let Some((name, list)) = spec.split_once('=') else {
        bail!("axis must look like name=v1,v2,...");
    };
    let name = name.trim();
    if name.is_empty() || list.trim().is_empty() {
        bail!("axis needs a name and at least one value");
    }
    let values = list
        .split(',')
        .map(|v| serde_json::from_str(v.trim()).unwrap_or_else(|_| Value::String(v.trim().to_string())))
        .collect();
    Ok((name.to_string(), values))
}

/// Sets `path` (dot separated) in `config`, creating objects on the way.
pub fn set_path(config: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = config;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            bail!("`{}` is not an object", parts[..i].join("."));
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| json!({}));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    NotConverged,
    Invalid,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub value: Value,
    pub status: RowStatus,
    pub report: Option<Value>,
    pub error: Option<String>,
    #[serde(skip)]
    pub table: Option<(Vec<String>, Vec<String>)>,
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs the template once per axis value into `out/<leaf>=<value>/`, then
/// writes the combined `table.csv` and `report.json` into `out`. Rows that
/// fail are recorded and the sweep continues.
pub fn sweep(template: &Value, axis: &str, values: &[Value], out: &Path) -> Result<Vec<SweepRow>> {
    let mut values = values.to_vec();
    if values.iter().all(Value::is_number) {
        values.sort_by(|a, b| a.as_f64().unwrap_or(0.0).total_cmp(&b.as_f64().unwrap_or(0.0)));
    }
    let leaf = axis.rsplit('.').next().unwrap_or(axis);
    let mut rows = Vec::new();
    for value in values {
        let mut cfg_value = template.clone();
        set_path(&mut cfg_value, axis, value.clone())?;
        let dir = out.join(format!("{leaf}={}", label(&value).replace(['/', '\\'], "_")));
        let row = match parse_config(&cfg_value) {
            Err(e) => SweepRow { value, status: RowStatus::Invalid, report: None, error: Some(e.to_string()), table: None },
            Ok(cfg) => match run_experiment(&cfg, &dir) {
                Ok(s) => SweepRow {
                    value,
                    status: if s.status == RunStatus::Ok { RowStatus::Ok } else { RowStatus::NotConverged },
                    report: Some(s.report),
                    error: None,
                    table: Some((s.header, s.row)),
                },
                Err(e) => SweepRow { value, status: RowStatus::Failed, report: None, error: Some(format!("{e:#}")), table: None },
            },
        };
        rows.push(row);
    }

    let inner = rows.iter().find_map(|r| r.table.as_ref().map(|t| t.0.clone())).unwrap_or_default();
    let header: Vec<String> = [leaf.to_string(), "status".to_string()].into_iter().chain(inner.iter().cloned()).collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![label(&r.value), crate::run::enum_name(&r.status)];
            match &r.table {
                Some((h, cells)) if *h == inner => line.extend(cells.iter().cloned()),
                _ => line.extend(std::iter::repeat(String::new()).take(inner.len())),
            }
            line
        })
        .collect();
    std::fs::create_dir_all(out)?;
    write_table(&out.join("table.csv"), &header, &table)?;
    write_json(&out.join("report.json"), &json!({ "axis": axis, "rows": rows }))?;
    Ok(rows)
}
