use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::result::{Aggregate, ExperimentResult, Metric, Table1Row};
use super::spec::GridPoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// `aggregate.csv`, plus `table1.csv` for clustering comparisons.
    Csv,
    /// `aggregate.json` with the same numbers as the CSV tables.
    Json,
    /// One CSV per method and curve under `plotdata/`.
    Plotdata,
}

/// Fails with an I/O error unless `dir` can be created and written to.
pub fn probe_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .open(&probe)
        .and_then(|mut f| f.write_all(b"ok"))
        .map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn grid_cells(g: &GridPoint) -> [String; 4] {
    [num(g.w), g.k.to_string(), num(g.lambda), opt(g.m_rate)]
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let to_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_records(result: &ExperimentResult, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("records.csv");
    let metric = result.metric.name();
    write_rows(
        &path,
        &[
            "method",
            "grid_index",
            "w",
            "k",
            "lambda",
            "m_rate",
            "trial",
            "status",
            metric,
            "error",
        ],
        result.records.iter().map(|r| {
            let mut row = vec![r.method.name().to_string(), r.grid_index.to_string()];
            row.extend(grid_cells(&r.grid));
            row.push(r.trial.to_string());
            row.push(if r.value.is_some() { "ok" } else { "failed" }.to_string());
            row.push(opt(r.value));
            row.push(r.error.clone().unwrap_or_default());
            row
        }),
    )?;
    Ok(path)
}

/// Raw outputs of a run: `records.csv`, `result.json` and `timings.csv`.
/// Wall-clock times live only in `timings.csv`, so the other files are
/// reproducible byte for byte.
pub fn write_raw(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    probe_writable(dir)?;
    let records = write_records(result, dir)?;
    let json = dir.join("result.json");
    write_json(&json, result)?;
    let timings = dir.join("timings.csv");
    write_rows(
        &timings,
        &["method", "grid_index", "trial", "runtime_secs"],
        result.records.iter().map(|r| {
            vec![
                r.method.name().to_string(),
                r.grid_index.to_string(),
                r.trial.to_string(),
                num(r.runtime_secs),
            ]
        }),
    )?;
    Ok(vec![records, json, timings])
}

pub fn read_result(path: impl AsRef<Path>) -> Result<ExperimentResult> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Serialize)]
struct AggregateDoc<'a> {
    metric: Metric,
    records: usize,
    failures: usize,
    aggregates: &'a [Aggregate],
    #[serde(skip_serializing_if = "<[Table1Row]>::is_empty")]
    table1: &'a [Table1Row],
}

/// Writes the requested report formats, always alongside `records.csv`.
/// The directory is checked for writability before anything is written.
pub fn emit_report(result: &ExperimentResult, formats: &[ReportFormat], dir: &Path) -> Result<Vec<PathBuf>> {
    probe_writable(dir)?;
    let mut written = vec![write_records(result, dir)?];
    for format in formats {
        match format {
            ReportFormat::Csv => {
                let path = dir.join("aggregate.csv");
                write_rows(
                    &path,
                    &[
                        "method",
                        "grid_index",
                        "w",
                        "k",
                        "lambda",
                        "m_rate",
                        "n_ok",
                        "n_failed",
                        "mean",
                        "std",
                    ],
                    result.aggregates.iter().map(|a| {
                        let mut row = vec![a.method.name().to_string(), a.grid_index.to_string()];
                        row.extend(grid_cells(&a.grid));
                        row.extend([a.n_ok.to_string(), a.n_failed.to_string(), opt(a.mean), opt(a.std)]);
                        row
                    }),
                )?;
                written.push(path);
                if !result.table1.is_empty() {
                    let path = dir.join("table1.csv");
                    write_rows(
                        &path,
                        &[
                            "grid_index",
                            "w",
                            "k",
                            "lambda",
                            "m_rate",
                            "impute",
                            "missing_scop",
                            "no_missing",
                            "trials_compared",
                            "ordering_held",
                        ],
                        result.table1.iter().map(|t| {
                            let mut row = vec![t.grid_index.to_string()];
                            row.extend(grid_cells(&t.grid));
                            row.extend([
                                opt(t.impute),
                                opt(t.missing_scop),
                                opt(t.no_missing),
                                t.trials_compared.to_string(),
                                t.ordering_held.to_string(),
                            ]);
                            row
                        }),
                    )?;
                    written.push(path);
                }
            }
            ReportFormat::Json => {
                let path = dir.join("aggregate.json");
                write_json(
                    &path,
                    &AggregateDoc {
                        metric: result.metric,
                        records: result.records.len(),
                        failures: result.failures,
                        aggregates: &result.aggregates,
                        table1: &result.table1,
                    },
                )?;
                written.push(path);
            }
            ReportFormat::Plotdata => written.extend(write_plotdata(result, dir)?),
        }
    }
    Ok(written)
}

#[derive(Clone, Copy, PartialEq)]
enum Axis {
    W,
    K,
    Lambda,
    MRate,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::W => "w",
            Axis::K => "k",
            Axis::Lambda => "lambda",
            Axis::MRate => "m_rate",
        }
    }

    fn value(self, g: &GridPoint) -> String {
        match self {
            Axis::W => num(g.w),
            Axis::K => g.k.to_string(),
            Axis::Lambda => num(g.lambda),
            Axis::MRate => opt(g.m_rate),
        }
    }
}

/// One file per method and combination of the other varying axes, with
/// the first varying axis (in the order w, k, lambda, m_rate) as x.
fn write_plotdata(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let sub = dir.join("plotdata");
    fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    let grid = &result.spec.grid;
    let varying: Vec<Axis> = [
        (Axis::W, grid.w.len()),
        (Axis::K, grid.k.len()),
        (Axis::Lambda, grid.lambda.len()),
        (Axis::MRate, grid.m_rate.len()),
    ]
    .into_iter()
    .filter(|&(_, n)| n > 1)
    .map(|(a, _)| a)
    .collect();
    let x = varying.first().copied().unwrap_or(Axis::W);
    let others: Vec<Axis> = varying.iter().copied().filter(|&a| a != x).collect();
    let metric = result.metric.name();

    // aggregates are grouped by method in spec order, grid points in grid order
    let mut files: Vec<(String, Vec<&Aggregate>)> = Vec::new();
    for a in &result.aggregates {
        let mut name = format!("{metric}_vs_{}__{}", x.name(), a.method.name());
        for o in &others {
            name.push_str(&format!("__{}{}", o.name(), o.value(&a.grid)));
        }
        match files.iter_mut().find(|(n, _)| *n == name) {
            Some((_, rows)) => rows.push(a),
            None => files.push((name, vec![a])),
        }
    }
    let mut written = Vec::new();
    for (name, rows) in files {
        let path = sub.join(format!("{name}.csv"));
        write_rows(
            &path,
            &[x.name(), "mean", "std"],
            rows.iter().map(|a| vec![x.value(&a.grid), opt(a.mean), opt(a.std)]),
        )?;
        written.push(path);
    }
    Ok(written)
}
