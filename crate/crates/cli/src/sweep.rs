//! Parameter sweeps over a Cartesian grid.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind};
use crate::error::{CliError, Result};
use crate::run::{compute, manifest, write_manifest, write_tables, RunManifest};
use crate::table::{write_atomic, Cell, Table};

/// Derived quantities reported per grid point for each base kind.
pub fn summary_keys(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::Classical => &["tau", "t_c", "D", "alpha", "beta"],
        Kind::Otoc => &["gamma", "t_star", "t_ehrenfest"],
        Kind::Spectrum => &["max_abs_eps_imag", "pt_broken", "lambda_c"],
        Kind::Quantum => &["final_mean_p", "final_m2", "final_log_norm"],
        Kind::Sweep => &[],
    }
}

fn cell(v: Option<&Value>) -> Cell {
    match v {
        Some(Value::Number(n)) => match n.as_i64() {
            Some(i) => Cell::Int(i),
            None => Cell::Float(n.as_f64().unwrap_or(f64::NAN)),
        },
        Some(Value::Bool(b)) => Cell::from(*b),
        Some(Value::String(s)) => Cell::Text(s.clone()),
        _ => Cell::Missing,
    }
}

enum PointResult {
    Done {
        files: Vec<String>,
        derived: serde_json::Map<String, Value>,
    },
    Failed(String),
}

fn run_point(cfg: &ExperimentConfig, index: usize, point: &[(String, String)]) -> PointResult {
    let dir_name = format!("point_{index:03}");
    let dir = cfg.out_dir.join(&dir_name);
    let attempt = catch_unwind(AssertUnwindSafe(|| -> Result<_> {
        let point_cfg = cfg.at_point(point, dir.clone())?;
        let out = compute(&point_cfg)?;
        let files = write_tables(&point_cfg, &dir, &out.tables)?;
        Ok((files, out.derived))
    }));
    match attempt {
        Ok(Ok((files, derived))) => PointResult::Done {
            files: files
                .into_iter()
                .map(|f| format!("{dir_name}/{f}"))
                .collect(),
            derived,
        },
        Ok(Err(e)) => PointResult::Failed(e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            PointResult::Failed(format!("panicked: {msg}"))
        }
    }
}

/// Runs the base experiment at every grid point, in parallel, and writes a
/// summary table with one row per successful point. Failed points are
/// listed in the manifest and turn the result into
/// [`CliError::PartialSweep`].
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RunManifest> {
    if cfg.kind != Kind::Sweep {
        return Err(CliError::config("run_sweep needs a sweep config"));
    }
    let started = Instant::now();
    let base = cfg.base_kind();
    let grid = cfg.grid();
    if grid.is_empty() {
        return Err(CliError::config("sweep grid is empty"));
    }
    let results: Vec<PointResult> = grid
        .par_iter()
        .enumerate()
        .map(|(i, point)| run_point(cfg, i, point))
        .collect();

    let keys = summary_keys(base);
    let mut summary = Table::new(
        cfg.sweep_axes
            .iter()
            .map(|a| a.key.clone())
            .chain(keys.iter().map(|k| k.to_string())),
    );
    let mut m = manifest(cfg, started);
    let mut failures = Vec::new();
    for (point, result) in grid.iter().zip(results) {
        match result {
            PointResult::Done { files, derived } => {
                let mut row: Vec<Cell> = point.iter().map(|(_, v)| Cell::Text(v.clone())).collect();
                row.extend(keys.iter().map(|k| cell(derived.get(*k))));
                summary.push(row);
                m.files.extend(files);
            }
            PointResult::Failed(error) => {
                let at: serde_json::Map<String, Value> =
                    point.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
                failures.push(json!({ "point": at, "error": error }));
            }
        }
    }

    let name = format!("sweep_summary.{}", cfg.format.extension());
    write_atomic(&cfg.out_dir.join(&name), &summary.render(cfg.format)?)?;
    m.files.insert(0, name);
    m.files.push("manifest.json".into());
    m.derived.insert("points".into(), json!(grid.len()));
    m.derived
        .insert("failed_points".into(), json!(failures.len()));
    let failed = failures.len();
    if failed > 0 {
        m.status = "partial".into();
        m.error = Some(format!("{failed} of {} sweep points failed", grid.len()));
        m.derived.insert("failures".into(), Value::Array(failures));
    }
    m = m.with_elapsed(started);
    write_manifest(&cfg.out_dir, &m)?;
    if failed > 0 {
        return Err(CliError::PartialSweep {
            failed,
            total: grid.len(),
        });
    }
    Ok(m)
}
