//! CSV and JSON writers. Floats are written with 17 significant digits so
//! that every value round-trips.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lab::phi::PhiEstimate;
use crate::lab::sweep::SweepRecord;
use crate::penalty::StageRecord;

/// Bumped whenever a column is added, removed or changes meaning.
pub const FORMAT_VERSION: u32 = 1;

/// Columns excluded from reproducibility comparisons.
pub const TIMING_COLUMNS: &[&str] = &["wall_time_ms"];

pub const SWEEP_COLUMNS: &[&str] = &[
    "format_version",
    "problem_id",
    "method",
    "N",
    "seed",
    "gamma",
    "opt_value",
    "dist_to_reference",
    "stationarity",
    "stationarity_small_step",
    "complementarity",
    "dual_feasibility",
    "primal_feasibility",
    "multiplier_norm",
    "duplicate_atoms",
    "validation_mean_beta",
    "grad_var_objective",
    "grad_var_penalty",
    "converged",
    "error",
    "wall_time_ms",
];

pub const PATH_COLUMNS: &[&str] = &[
    "format_version",
    "stage",
    "gamma",
    "tol",
    "objective",
    "prox_residual",
    "iterations",
    "converged",
    "mean_penalty",
    "max_violation",
    "wall_time_ms",
];

pub const PHI_COLUMNS: &[&str] =
    &["format_version", "problem_id", "s", "phi", "objective_gap", "mean_penalty", "converged"];

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_row(r: &SweepRecord) -> Vec<String> {
    let k = r.kkt.as_ref();
    let kf = |f: fn(&crate::kkt::KktReport) -> f64| opt(k.map(f));
    vec![
        FORMAT_VERSION.to_string(),
        r.problem_id.clone(),
        r.method.as_str().to_string(),
        r.n.to_string(),
        r.seed.to_string(),
        opt(r.gamma),
        num(r.opt_value),
        opt(r.dist_to_reference),
        kf(|k| k.stationarity),
        kf(|k| k.stationarity_small_step),
        kf(|k| k.complementarity),
        kf(|k| k.dual_feasibility),
        kf(|k| k.primal_feasibility),
        kf(|k| k.multiplier_norm),
        k.map(|k| k.duplicate_atoms.to_string()).unwrap_or_default(),
        num(r.validation_mean_beta),
        num(r.grad_var_objective),
        num(r.grad_var_penalty),
        r.converged.to_string(),
        r.error.clone().unwrap_or_default(),
        num(r.wall_time_ms),
    ]
}

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    write_rows(path, SWEEP_COLUMNS, records.iter().map(sweep_row))
}

pub fn write_path_csv(path: &Path, stages: &[StageRecord]) -> Result<()> {
    write_rows(
        path,
        PATH_COLUMNS,
        stages.iter().enumerate().map(|(i, s)| {
            vec![
                FORMAT_VERSION.to_string(),
                i.to_string(),
                num(s.gamma),
                num(s.tol),
                num(s.result.objective),
                num(s.result.prox_residual),
                s.result.iterations.to_string(),
                s.result.converged.to_string(),
                num(s.mean_penalty),
                num(s.max_violation),
                num(s.result.wall_time_ms),
            ]
        }),
    )
}

pub fn write_phi_csv(path: &Path, problem_id: &str, rows: &[PhiEstimate]) -> Result<()> {
    write_rows(
        path,
        PHI_COLUMNS,
        rows.iter().map(|e| {
            vec![
                FORMAT_VERSION.to_string(),
                problem_id.to_string(),
                num(e.s),
                num(e.phi),
                num(e.objective_gap),
                num(e.mean_penalty),
                e.converged.to_string(),
            ]
        }),
    )
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    format_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, body: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(&Versioned { format_version: FORMAT_VERSION, body })
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn prepare_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}
