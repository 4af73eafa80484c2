//! Subcommand implementations. Each returns the text to print on stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fracvep_core::driver::{
    benchmark_complexity, energy_convergence, energy_convergence_quadratic, energy_trajectory, simulate_with,
    stress_convergence_with, ConvergenceRow,
};
use fracvep_core::energy::psi_quadratic_exact;
use fracvep_core::{EnergyMode, LoadProgram};

use crate::config::{Observable, RunConfig};
use crate::output::{self, fmt_f64, Summary};
use crate::CliError;

/// Timed trials per size in `bench`, after one discarded warm-up.
pub const BENCH_TRIALS: usize = 3;

pub fn default_bench_sizes() -> Vec<usize> {
    (8..=12).map(|k| 1usize << k).collect()
}

fn output_path(config: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.output_path))
}

pub fn simulate(config: &RunConfig, out: Option<&Path>) -> Result<String, CliError> {
    let report = simulate_with(&config.material, &config.grid, &config.load, config.energy_mode)?;
    let path = output_path(config, out);
    output::write_csv(
        &path,
        &output::SIMULATE_HEADER,
        &output::simulate_rows(&report, &config.grid),
    )?;
    let summary = Summary::from_report(&report);
    let summary_path = output::write_summary(&path, &summary)?;
    Ok(format!(
        "{}: {} steps, final D = {}, {:.3}s\nwrote {} and {}\n",
        report.status.label(),
        summary.steps_completed,
        fmt_f64(summary.final_damage),
        summary.wall_time_s,
        path.display(),
        summary_path.display()
    ))
}

fn closed_form_applies(config: &RunConfig) -> bool {
    matches!(config.load, LoadProgram::QuadraticRamp { t_final } if t_final == config.grid.t_final())
}

pub fn converge(config: &RunConfig, levels: usize, out: Option<&Path>, workers: usize) -> Result<String, CliError> {
    let t_final = config.grid.t_final();
    let reference = config.grid.steps();
    let m = &config.material;
    let rows: Vec<ConvergenceRow> = match config.observable {
        Observable::Stress => {
            let ladder = config.convergence_levels(levels, true)?;
            stress_convergence_with(
                m,
                &config.load,
                t_final,
                reference,
                &ladder,
                config.energy_mode,
                workers,
            )?
        }
        Observable::FreeEnergy if closed_form_applies(config) => {
            let ladder = config.convergence_levels(levels, false)?;
            energy_convergence_quadratic(m.beta_e, m.e_pseudo, t_final, &ladder, config.energy_mode)?
        }
        Observable::FreeEnergy => {
            let ladder = config.convergence_levels(levels, true)?;
            energy_convergence(
                &config.load,
                m.beta_e,
                m.e_pseudo,
                t_final,
                reference,
                &ladder,
                config.energy_mode,
            )?
        }
    };
    let table = output::convergence_rows(&rows);
    if let Some(path) = out {
        output::write_csv(path, &output::CONVERGE_HEADER, &table)?;
    }
    Ok(output::csv_string(&output::CONVERGE_HEADER, &table))
}

pub fn bench(sizes: &[usize], modes: &[EnergyMode], out: Option<&Path>) -> Result<String, CliError> {
    if sizes.is_empty() {
        return Err(CliError::Usage("--sizes: at least one size is required".into()));
    }
    let tables = modes
        .iter()
        .map(|&mode| benchmark_complexity(sizes, mode, BENCH_TRIALS))
        .collect::<Result<Vec<_>, _>>()?;
    let table = output::timing_rows(&tables);
    if let Some(path) = out {
        output::write_csv(path, &output::BENCH_HEADER, &table)?;
    }
    let mut text = output::csv_string(&output::BENCH_HEADER, &table);
    for t in &tables {
        match t.slope {
            Some(s) => writeln!(text, "# {} slope {s:.3}", t.mode),
            None => writeln!(text, "# {} slope omitted (single size)", t.mode),
        }
        .expect("writing to a string");
    }
    Ok(text)
}

pub fn energy(config: &RunConfig, out: Option<&Path>) -> Result<String, CliError> {
    let grid = &config.grid;
    let m = &config.material;
    let mode = config.energy_mode.resolve(grid.steps());
    let psi = energy_trajectory(&config.load, grid, m.beta_e, m.e_pseudo, mode)?;
    let exact_t_final = match config.load {
        LoadProgram::QuadraticRamp { t_final } => Some(t_final),
        _ => None,
    };
    let psi_column = format!("psi_{}", mode.as_str());
    let header = ["step", "t", "eps", psi_column.as_str(), "psi_exact", "abs_err"];
    let mut rows = Vec::with_capacity(psi.len());
    for (k, &p) in psi.iter().enumerate() {
        let t = grid.time(k);
        let exact = match exact_t_final {
            Some(tf) if t <= tf => Some(psi_quadratic_exact(t, tf, m.e_pseudo, m.beta_e)?),
            _ => None,
        };
        rows.push(vec![
            k.to_string(),
            fmt_f64(t),
            fmt_f64(config.load.strain_at(t)),
            fmt_f64(p),
            exact.map(fmt_f64).unwrap_or_default(),
            exact.map(|e| fmt_f64((p - e).abs())).unwrap_or_default(),
        ]);
    }
    let path = output_path(config, out);
    output::write_csv(&path, &header, &rows)?;
    let max_err = rows
        .iter()
        .filter_map(|r| r[5].parse::<f64>().ok())
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
    let mut text = format!("{} free energy over {} steps\n", mode, grid.steps());
    if let Some(e) = max_err {
        writeln!(text, "max abs error against the closed form: {}", fmt_f64(e)).expect("writing to a string");
    }
    writeln!(text, "wrote {}", path.display()).expect("writing to a string");
    Ok(text)
}
