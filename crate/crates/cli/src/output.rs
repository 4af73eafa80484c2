//! CSV tables and the run summary sidecar. Floats carry 17 significant digits,
//! records end in LF.

use std::io::Write;
use std::path::{Path, PathBuf};

use fracvep_core::driver::{ConvergenceRow, RunReport, RunStatus, TimingTable};
use fracvep_core::TimeGrid;
use serde::Serialize;

use crate::CliError;

pub const SIMULATE_HEADER: [&str; 10] = [
    "step", "t", "eps", "eps_ve", "eps_vp", "alpha", "tau", "D", "Y_ve", "f_trial",
];
pub const CONVERGE_HEADER: [&str; 4] = ["steps", "dt", "error", "order"];
pub const BENCH_HEADER: [&str; 4] = ["N", "mode", "median_seconds", "slope"];

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

fn write_table<W: Write>(sink: W, header: &[&str], rows: &[Vec<String>]) -> csv::Result<()> {
    let mut w = writer(sink);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a table to `path`.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
    write_table(std::io::BufWriter::new(file), header, rows).map_err(|e| io_error(path, e))
}

/// Renders a table as CSV text.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut buf = Vec::new();
    write_table(&mut buf, header, rows).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn simulate_rows(report: &RunReport, grid: &TimeGrid) -> Vec<Vec<String>> {
    let h = &report.history;
    (0..h.len())
        .map(|k| {
            let mut row = vec![k.to_string(), fmt_f64(grid.time(k))];
            row.extend(
                [
                    h.eps_total[k],
                    h.eps_ve[k],
                    h.eps_vp[k],
                    h.alpha[k],
                    h.stress[k],
                    h.damage[k],
                    h.y_ve[k],
                    h.f_trial[k],
                ]
                .map(fmt_f64),
            );
            row
        })
        .collect()
}

pub fn convergence_rows(rows: &[ConvergenceRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.steps.to_string(),
                fmt_f64(r.dt),
                fmt_f64(r.error),
                r.order.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect()
}

pub fn timing_rows(tables: &[TimingTable]) -> Vec<Vec<String>> {
    tables
        .iter()
        .flat_map(|t| {
            t.rows.iter().map(move |r| {
                vec![
                    r.steps.to_string(),
                    t.mode.as_str().to_string(),
                    fmt_f64(r.median_seconds),
                    t.slope.map(fmt_f64).unwrap_or_default(),
                ]
            })
        })
        .collect()
}

/// Run summary written next to the simulation CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// `completed` or `failed_at_step`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_at_step: Option<usize>,
    pub steps_completed: usize,
    pub wall_time_s: f64,
    pub final_damage: f64,
    pub energy_mode: String,
}

impl Summary {
    pub fn from_report(report: &RunReport) -> Self {
        let (status, failed_at_step) = match report.status {
            RunStatus::Completed => ("completed", None),
            RunStatus::FailedAtStep(k) => ("failed_at_step", Some(k)),
        };
        Self {
            status: status.to_string(),
            failed_at_step,
            steps_completed: report.history.len().saturating_sub(1),
            wall_time_s: report.wall_time.as_secs_f64(),
            final_damage: report.final_damage(),
            energy_mode: report.energy_mode.as_str().to_string(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }
}

/// `run.csv` -> `run.summary.toml`.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.toml")
}

pub fn write_summary(csv_path: &Path, summary: &Summary) -> Result<PathBuf, CliError> {
    let path = summary_path(csv_path);
    std::fs::write(&path, summary.to_toml()).map_err(|e| io_error(&path, e))?;
    Ok(path)
}
