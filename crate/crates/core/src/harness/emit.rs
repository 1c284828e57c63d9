//! CSV and JSON output. Column sets are fixed; see the README for schemas.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::{preset_hash, RunConfig};
use super::drivers::{AggregateRow, CostModelReport, ErrorReport, HardwareReport, JacobiRow};
use crate::runtime::write_telemetry_csv;

pub const STEP_COLUMNS: &[&str] = &[
    "shots", "repetition", "step", "time", "l2", "linf", "rel_l2", "rel_linf",
];

pub const AGGREGATE_COLUMNS: &[&str] = &[
    "shots",
    "step",
    "time",
    "l2_mean",
    "l2_std",
    "l2_se",
    "linf_mean",
    "linf_std",
    "linf_se",
    "rel_l2_mean",
    "rel_l2_std",
    "rel_l2_se",
    "rel_linf_mean",
    "rel_linf_std",
    "rel_linf_se",
];

pub const HARDWARE_COLUMNS: &[&str] = &["repetition", "mitigated", "l2", "linf"];

pub const JACOBI_COLUMNS: &[&str] = &["node", "exact", "estimate", "std_error"];

#[derive(Serialize)]
struct StepCsv {
    shots: u64,
    repetition: usize,
    step: usize,
    time: f64,
    l2: f64,
    linf: f64,
    rel_l2: Option<f64>,
    rel_linf: Option<f64>,
}

#[derive(Serialize)]
struct AggregateCsv {
    shots: u64,
    step: usize,
    time: f64,
    l2_mean: f64,
    l2_std: f64,
    l2_se: f64,
    linf_mean: f64,
    linf_std: f64,
    linf_se: f64,
    rel_l2_mean: f64,
    rel_l2_std: f64,
    rel_l2_se: f64,
    rel_linf_mean: f64,
    rel_linf_std: f64,
    rel_linf_se: f64,
}

impl From<&AggregateRow> for AggregateCsv {
    fn from(r: &AggregateRow) -> Self {
        AggregateCsv {
            shots: r.shots,
            step: r.step,
            time: r.time,
            l2_mean: r.l2.mean,
            l2_std: r.l2.std,
            l2_se: r.l2.se,
            linf_mean: r.linf.mean,
            linf_std: r.linf.std,
            linf_se: r.linf.se,
            rel_l2_mean: r.rel_l2.mean,
            rel_l2_std: r.rel_l2.std,
            rel_l2_se: r.rel_l2.se,
            rel_linf_mean: r.rel_linf.mean,
            rel_linf_std: r.rel_linf.std,
            rel_linf_se: r.rel_linf.se,
        }
    }
}

/// Create `dir` (and parents) if missing.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `<name>_steps.csv` (one row per step per repetition),
/// `<name>_aggregate.csv` (mean/std/se per step) and `<name>_summary.csv`
/// (last step per shot count). Returns the written paths.
pub fn write_error_report(dir: &Path, name: &str, report: &ErrorReport) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let steps = dir.join(format!("{name}_steps.csv"));
    write_rows(
        &steps,
        STEP_COLUMNS,
        report.series.iter().flat_map(|s| {
            s.steps.iter().map(move |r| StepCsv {
                shots: s.shots,
                repetition: s.repetition,
                step: r.step,
                time: r.time,
                l2: r.norms.l2,
                linf: r.norms.linf,
                rel_l2: r.norms.rel_l2,
                rel_linf: r.norms.rel_linf,
            })
        }),
    )?;
    let aggregate = dir.join(format!("{name}_aggregate.csv"));
    write_rows(&aggregate, AGGREGATE_COLUMNS, report.aggregate.iter().map(AggregateCsv::from))?;
    let summary = dir.join(format!("{name}_summary.csv"));
    write_rows(&summary, AGGREGATE_COLUMNS, report.final_rows().iter().map(AggregateCsv::from))?;
    Ok(vec![steps, aggregate, summary])
}

pub fn write_hardware_report(dir: &Path, name: &str, report: &HardwareReport) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let path = dir.join(format!("{name}_summary.csv"));
    write_rows(&path, HARDWARE_COLUMNS, &report.rows)?;
    Ok(vec![path])
}

pub fn write_jacobi(dir: &Path, name: &str, rows: &[JacobiRow]) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let path = dir.join(format!("{name}_summary.csv"));
    write_rows(&path, JACOBI_COLUMNS, rows)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct PhaseCsv<'a> {
    kernel_kind: &'a str,
    jobs: usize,
    transpile_mean: f64,
    transpile_std: f64,
    queue_mean: f64,
    queue_std: f64,
    execution_mean: f64,
    execution_std: f64,
    wall_mean: f64,
    wall_std: f64,
}

pub const PHASE_COLUMNS: &[&str] = &[
    "kernel_kind",
    "jobs",
    "transpile_mean",
    "transpile_std",
    "queue_mean",
    "queue_std",
    "execution_mean",
    "execution_std",
    "wall_mean",
    "wall_std",
];

/// Telemetry (fit jobs and per-node jobs) plus a per-kind phase summary.
pub fn write_cost_model(dir: &Path, name: &str, report: &CostModelReport) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let fit = dir.join(format!("{name}_fit_telemetry.csv"));
    write_telemetry_csv(&fit, &report.fit_telemetry)?;
    let table = dir.join(format!("{name}_telemetry.csv"));
    write_telemetry_csv(&table, &report.table_telemetry)?;
    let summary = dir.join(format!("{name}_summary.csv"));
    write_rows(
        &summary,
        PHASE_COLUMNS,
        report.table_summary.iter().map(|s| PhaseCsv {
            kernel_kind: &s.kernel_kind,
            jobs: s.jobs,
            transpile_mean: s.transpile.0,
            transpile_std: s.transpile.1,
            queue_mean: s.queue.0,
            queue_std: s.queue.1,
            execution_mean: s.execution.0,
            execution_std: s.execution.1,
            wall_mean: s.wall.0,
            wall_std: s.wall.1,
        }),
    )?;
    Ok(vec![fit, table, summary])
}

#[derive(Serialize)]
struct Metadata<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    presets: BTreeMap<String, String>,
    files: Vec<String>,
    results: T,
}

/// `<name>_metadata.json`: full config, seed, preset hashes, written file
/// names and a driver-specific `results` object. No timestamps, so reruns
/// are byte-identical.
pub fn write_metadata<T: Serialize>(
    dir: &Path,
    name: &str,
    cfg: &RunConfig,
    files: &[PathBuf],
    results: T,
) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let presets = cfg
        .presets_used()
        .into_iter()
        .filter_map(|p| preset_hash(&p).map(|h| (p, h)))
        .collect();
    let meta = Metadata {
        command: name,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        presets,
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        results,
    };
    let path = dir.join(format!("{name}_metadata.json"));
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Config(format!("metadata serialization: {e}")))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
