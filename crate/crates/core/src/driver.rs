//! Strain programs, full-trajectory simulation, error metrics and timing harnesses.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::energy::{EnergyMode, FreeEnergy};
use crate::error::{Error, Result};
use crate::fracops::{FractionalOrder, TimeGrid};
use crate::plasticity::{MaterialParams, ReturnMapping, StateHistory};

/// Prescribed total strain `eps(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadProgram {
    /// `rate * t`.
    LinearRamp { rate: f64 },
    /// `(t / t_final)^2`.
    QuadraticRamp { t_final: f64 },
    /// `amplitude * sin(omega t)`, `omega` in rad/s.
    Sinusoid { amplitude: f64, omega: f64 },
    /// `(2 amplitude / pi) asin(sin(2 pi omega t))`: constant-rate loading and unloading.
    TriangleWave { amplitude: f64, omega: f64 },
}

impl LoadProgram {
    pub fn strain_at(&self, t: f64) -> f64 {
        match *self {
            LoadProgram::LinearRamp { rate } => rate * t,
            LoadProgram::QuadraticRamp { t_final } => (t / t_final).powi(2),
            LoadProgram::Sinusoid { amplitude, omega } => amplitude * (omega * t).sin(),
            LoadProgram::TriangleWave { amplitude, omega } => {
                2.0 * amplitude / PI * (2.0 * PI * omega * t).sin().asin()
            }
        }
    }

    /// Magnitude of the strain rate where it is constant (ramp and triangle wave).
    pub fn nominal_rate(&self) -> Option<f64> {
        match *self {
            LoadProgram::LinearRamp { rate } => Some(rate.abs()),
            LoadProgram::TriangleWave { amplitude, omega } => Some(4.0 * (amplitude * omega).abs()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite, got {v}")))
            }
        };
        match *self {
            LoadProgram::LinearRamp { rate } => finite("rate", rate),
            LoadProgram::QuadraticRamp { t_final } => {
                if t_final.is_finite() && t_final > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("T", format!("must be positive, got {t_final}")))
                }
            }
            LoadProgram::Sinusoid { amplitude, omega } | LoadProgram::TriangleWave { amplitude, omega } => {
                finite("amplitude", amplitude)?;
                finite("omega", omega)
            }
        }
    }

    /// `eps(t_0), ..., eps(t_N)`.
    pub fn sample(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.times().map(|t| self.strain_at(t)).collect()
    }
}

pub fn strain_at(program: &LoadProgram, t: f64) -> f64 {
    program.strain_at(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// Damage hit the failure cutoff while computing time level `k`.
    FailedAtStep(usize),
}

impl RunStatus {
    pub fn label(&self) -> String {
        match self {
            RunStatus::Completed => "completed".to_string(),
            RunStatus::FailedAtStep(k) => format!("failed_at_step({k})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub history: StateHistory,
    pub wall_time: Duration,
    pub status: RunStatus,
    /// Energy mode actually used for the release rate.
    pub energy_mode: EnergyMode,
}

impl RunReport {
    /// Damage of the last completed step.
    pub fn final_damage(&self) -> f64 {
        self.history.damage.last().copied().unwrap_or(0.0)
    }

    /// Final damage with a failed run counted as fully damaged (`D = 1`).
    pub fn terminal_damage(&self) -> f64 {
        match self.status {
            RunStatus::Completed => self.final_damage(),
            RunStatus::FailedAtStep(_) => 1.0,
        }
    }

    /// Time level at which the damage update failed, if it did.
    pub fn failure_time(&self, grid: &TimeGrid) -> Option<f64> {
        match self.status {
            RunStatus::Completed => None,
            RunStatus::FailedAtStep(k) => Some(grid.time(k)),
        }
    }

    /// Orders runs by damage severity: terminal damage first, then earlier failure.
    pub fn severity_cmp(&self, self_grid: &TimeGrid, other: &RunReport, other_grid: &TimeGrid) -> std::cmp::Ordering {
        self.terminal_damage()
            .total_cmp(&other.terminal_damage())
            .then_with(
                || match (self.failure_time(self_grid), other.failure_time(other_grid)) {
                    (Some(a), Some(b)) => b.total_cmp(&a),
                    _ => std::cmp::Ordering::Equal,
                },
            )
    }
}

/// Runs the return mapping over the grid with `eps_{n+1} = program(t_{n+1})`,
/// using the automatic energy mode.
pub fn simulate(params: &MaterialParams, grid: &TimeGrid, program: &LoadProgram) -> Result<RunReport> {
    simulate_with(params, grid, program, EnergyMode::Auto)
}

pub fn simulate_with(
    params: &MaterialParams,
    grid: &TimeGrid,
    program: &LoadProgram,
    mode: EnergyMode,
) -> Result<RunReport> {
    program.validate()?;
    let start = Instant::now();
    let mut mapping = ReturnMapping::new(*params, grid, mode)?;
    let mut history = StateHistory::with_capacity(grid.steps());
    let mut status = RunStatus::Completed;
    for n in 0..grid.steps() {
        match mapping.step(&mut history, program.strain_at(grid.time(n + 1))) {
            Ok(_) => {}
            Err(Error::MaterialFailure { .. }) => {
                status = RunStatus::FailedAtStep(n + 1);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunReport {
        history,
        wall_time: start.elapsed(),
        status,
        energy_mode: mapping.energy_mode(),
    })
}

/// One entry of a simulation sweep.
#[derive(Debug, Clone, Copy)]
pub struct SimulationJob {
    pub params: MaterialParams,
    pub grid: TimeGrid,
    pub program: LoadProgram,
    pub mode: EnergyMode,
}

/// Runs independent simulations on up to `workers` threads. Results keep the job order.
pub fn simulate_many(jobs: &[SimulationJob], workers: usize) -> Vec<Result<RunReport>> {
    let workers = workers.clamp(1, jobs.len().max(1));
    if workers == 1 {
        return jobs
            .iter()
            .map(|j| simulate_with(&j.params, &j.grid, &j.program, j.mode))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunReport>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let result = simulate_with(&job.params, &job.grid, &job.program, job.mode);
                *slots[i].lock().expect("worker panicked") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("worker panicked")
                .expect("every job is claimed")
        })
        .collect()
}

/// Free-energy density `psi(t_0), ..., psi(t_N)` of the strain program.
pub fn energy_trajectory(
    program: &LoadProgram,
    grid: &TimeGrid,
    beta: FractionalOrder,
    e_pseudo: f64,
    mode: EnergyMode,
) -> Result<Vec<f64>> {
    program.validate()?;
    let strain = program.sample(grid);
    let mut evaluator = FreeEnergy::new(beta, e_pseudo, grid.dt(), grid.steps(), mode)?;
    let mut increments = Vec::with_capacity(grid.steps());
    let mut psi = Vec::with_capacity(grid.steps() + 1);
    psi.push(0.0);
    for m in 1..=grid.steps() {
        // newest-first: prepend by rebuilding from the series
        increments.clear();
        increments.extend(strain[..=m].windows(2).rev().map(|w| w[1] - w[0]));
        psi.push(evaluator.evaluate(&increments));
    }
    Ok(psi)
}

/// Max-norm relative error of `approx` against `reference` at their shared grid
/// points. `reference` must be an integer refinement of `approx`; both include `t_0`.
pub fn relative_error(reference: &[f64], approx: &[f64]) -> Result<f64> {
    if reference.len() < 2 || approx.len() < 2 {
        return Err(Error::invalid("series", "need at least two grid points"));
    }
    let (fine, coarse) = (reference.len() - 1, approx.len() - 1);
    if fine % coarse != 0 {
        return Err(Error::invalid(
            "grid",
            format!("{coarse}-step grid shares no refinement with the {fine}-step reference"),
        ));
    }
    let stride = fine / coarse;
    let diff = approx
        .iter()
        .enumerate()
        .map(|(k, &a)| (reference[k * stride] - a).abs())
        .fold(0.0, f64::max);
    if diff == 0.0 {
        return Ok(0.0);
    }
    let norm = reference.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if norm == 0.0 {
        return Err(Error::invalid(
            "reference",
            "identically zero reference with nonzero error",
        ));
    }
    Ok(diff / norm)
}

/// `log2(err_coarse / err_fine)` for a halved step.
pub fn convergence_order(err_coarse: f64, err_fine: f64) -> Result<f64> {
    if !(err_coarse > 0.0 && err_fine > 0.0) {
        return Err(Error::invalid(
            "error",
            format!("orders need positive errors (exact match?), got {err_coarse} and {err_fine}"),
        ));
    }
    Ok((err_coarse / err_fine).log2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub dt: f64,
    pub error: f64,
    /// Order against the previous (coarser) row.
    pub order: Option<f64>,
}

fn with_orders(rows: Vec<(usize, f64, f64)>) -> Result<Vec<ConvergenceRow>> {
    let mut out: Vec<ConvergenceRow> = Vec::with_capacity(rows.len());
    for (steps, dt, error) in rows {
        let order = match out.last() {
            Some(prev) => Some(convergence_order(prev.error, error)?),
            None => None,
        };
        out.push(ConvergenceRow {
            steps,
            dt,
            error,
            order,
        });
    }
    Ok(out)
}

fn check_levels(levels: &[usize], reference_steps: Option<usize>) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::invalid("levels", "at least two levels are needed for an order"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("levels", "step counts must be strictly increasing"));
    }
    if let Some(r) = reference_steps {
        if let Some(&bad) = levels.iter().find(|&&n| n >= r || r % n != 0) {
            return Err(Error::invalid(
                "levels",
                format!("{bad} steps is not a strict coarsening of the {r}-step reference"),
            ));
        }
    }
    Ok(())
}

/// Stress convergence of the return mapping against a fine reference run.
pub fn stress_convergence(
    params: &MaterialParams,
    program: &LoadProgram,
    t_final: f64,
    reference_steps: usize,
    levels: &[usize],
    mode: EnergyMode,
) -> Result<Vec<ConvergenceRow>> {
    stress_convergence_with(params, program, t_final, reference_steps, levels, mode, 1)
}

/// [`stress_convergence`] with the reference and level runs spread over `workers` threads.
pub fn stress_convergence_with(
    params: &MaterialParams,
    program: &LoadProgram,
    t_final: f64,
    reference_steps: usize,
    levels: &[usize],
    mode: EnergyMode,
    workers: usize,
) -> Result<Vec<ConvergenceRow>> {
    check_levels(levels, Some(reference_steps))?;
    let jobs = std::iter::once(reference_steps)
        .chain(levels.iter().copied())
        .map(|steps| {
            Ok(SimulationJob {
                params: *params,
                grid: TimeGrid::new(t_final, steps)?,
                program: *program,
                mode,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stresses = Vec::with_capacity(jobs.len());
    for result in simulate_many(&jobs, workers) {
        let report = result?;
        if let RunStatus::FailedAtStep(k) = report.status {
            return Err(Error::MaterialFailure {
                damage: report.history.damage.get(k.saturating_sub(1)).copied().unwrap_or(1.0),
            });
        }
        stresses.push(report.history.stress);
    }
    let reference = &stresses[0];
    let mut rows = Vec::new();
    for (job, stress) in jobs.iter().zip(&stresses).skip(1) {
        rows.push((job.grid.steps(), job.grid.dt(), relative_error(reference, stress)?));
    }
    with_orders(rows)
}

/// Free-energy convergence for `eps = (t/T)^2` against the analytic solution.
pub fn energy_convergence_quadratic(
    beta: FractionalOrder,
    e_pseudo: f64,
    t_final: f64,
    levels: &[usize],
    mode: EnergyMode,
) -> Result<Vec<ConvergenceRow>> {
    check_levels(levels, None)?;
    let program = LoadProgram::QuadraticRamp { t_final };
    let mut rows = Vec::new();
    for &n in levels {
        let grid = TimeGrid::new(t_final, n)?;
        let psi = energy_trajectory(&program, &grid, beta, e_pseudo, mode)?;
        let exact = grid
            .times()
            .map(|t| crate::energy::psi_quadratic_exact(t.min(t_final), t_final, e_pseudo, beta))
            .collect::<Result<Vec<_>>>()?;
        rows.push((n, grid.dt(), relative_error(&exact, &psi)?));
    }
    with_orders(rows)
}

/// Free-energy convergence against a fine numerical reference trajectory.
pub fn energy_convergence(
    program: &LoadProgram,
    beta: FractionalOrder,
    e_pseudo: f64,
    t_final: f64,
    reference_steps: usize,
    levels: &[usize],
    mode: EnergyMode,
) -> Result<Vec<ConvergenceRow>> {
    check_levels(levels, Some(reference_steps))?;
    let reference = energy_trajectory(program, &TimeGrid::new(t_final, reference_steps)?, beta, e_pseudo, mode)?;
    let mut rows = Vec::new();
    for &n in levels {
        let grid = TimeGrid::new(t_final, n)?;
        let psi = energy_trajectory(program, &grid, beta, e_pseudo, mode)?;
        rows.push((n, grid.dt(), relative_error(&reference, &psi)?));
    }
    with_orders(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub steps: usize,
    pub median_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingTable {
    pub mode: EnergyMode,
    pub rows: Vec<TimingRow>,
    /// Fitted log-log slope of time against `N`; absent for a single size.
    pub slope: Option<f64>,
}

impl TimingTable {
    pub fn seconds_at(&self, steps: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.steps == steps).map(|r| r.median_seconds)
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Times a full free-energy trajectory (quadratic strain, `beta = 0.5`, `E = 100`,
/// `T = 1`) per size: one discarded warm-up, then the median of `trials` runs.
pub fn benchmark_complexity(sizes: &[usize], mode: EnergyMode, trials: usize) -> Result<TimingTable> {
    if sizes.is_empty() {
        return Err(Error::invalid("sizes", "at least one size is required"));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) || sizes[0] == 0 {
        return Err(Error::invalid(
            "sizes",
            "sizes must be positive and strictly increasing",
        ));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "at least one trial is required"));
    }
    let beta = FractionalOrder::new(0.5)?;
    let program = LoadProgram::QuadraticRamp { t_final: 1.0 };
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let grid = TimeGrid::new(1.0, n)?;
        let mut sink = 0.0;
        sink += energy_trajectory(&program, &grid, beta, 100.0, mode)?[n];
        let mut times = Vec::with_capacity(trials);
        for _ in 0..trials {
            let start = Instant::now();
            let psi = energy_trajectory(&program, &grid, beta, 100.0, mode)?;
            times.push(start.elapsed().as_secs_f64());
            sink += psi[n];
        }
        std::hint::black_box(sink);
        rows.push(TimingRow {
            steps: n,
            median_seconds: median(times),
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.steps as f64, r.median_seconds)).collect();
    Ok(TimingTable {
        mode: mode.resolve(*sizes.last().unwrap()),
        slope: loglog_slope(&points),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(b: f64) -> FractionalOrder {
        FractionalOrder::new(b).unwrap()
    }

    #[test]
    fn strain_program_examples() {
        let ramp = LoadProgram::LinearRamp { rate: 0.64 };
        assert!((ramp.strain_at(0.03125) - 0.02).abs() < 1e-15);
        let tri = LoadProgram::TriangleWave {
            amplitude: 0.1,
            omega: 2.0 * PI,
        };
        assert!((tri.nominal_rate().unwrap() - 2.51).abs() < 0.01);
        // finite-difference slope on the rising branch
        let h = 1e-6;
        let slope = (tri.strain_at(0.01 + h) - tri.strain_at(0.01)) / h;
        assert!((slope - 2.513).abs() < 1e-3);
        for p in [
            ramp,
            tri,
            LoadProgram::QuadraticRamp { t_final: 2.0 },
            LoadProgram::Sinusoid {
                amplitude: 1.0,
                omega: PI,
            },
        ] {
            assert_eq!(strain_at(&p, 0.0), 0.0);
        }
        let q = LoadProgram::QuadraticRamp { t_final: 2.0 };
        assert_eq!(q.strain_at(1.0), 0.25);
        assert!(LoadProgram::QuadraticRamp { t_final: 0.0 }.validate().is_err());
        assert!(LoadProgram::Sinusoid {
            amplitude: f64::NAN,
            omega: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn triangle_rates_for_cyclic_frequencies() {
        let expected = [2.51, 5.02, 10.05];
        for (k, w) in [2.0 * PI, 4.0 * PI, 8.0 * PI].into_iter().enumerate() {
            let tri = LoadProgram::TriangleWave {
                amplitude: 0.1,
                omega: w,
            };
            assert!((tri.nominal_rate().unwrap() - expected[k]).abs() < 0.01);
        }
    }

    #[test]
    fn relative_error_examples() {
        assert_eq!(relative_error(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(relative_error(&[0.0, 2.0, 4.0], &[0.0, 1.0, 4.0]).unwrap(), 0.25);
        // coarsening by 2 compares points 0, 2, 4
        let r = relative_error(&[0.0, 9.0, 2.0, 9.0, 4.0], &[0.0, 2.0, 3.0]).unwrap();
        assert_eq!(r, 1.0 / 9.0);
        assert!(relative_error(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(relative_error(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn self_coarsening_has_zero_error() {
        let fine: Vec<f64> = (0..=64).map(|k| (k as f64 * 0.1).cos()).collect();
        for stride in [1usize, 2, 4, 8, 16, 32, 64] {
            let coarse: Vec<f64> = fine.iter().step_by(stride).copied().collect();
            assert_eq!(relative_error(&fine, &coarse).unwrap(), 0.0);
        }
    }

    #[test]
    fn order_examples() {
        assert_eq!(convergence_order(0.4, 0.1).unwrap(), 2.0);
        assert_eq!(convergence_order(0.4, 0.2).unwrap(), 1.0);
        assert!(convergence_order(0.0, 0.1).is_err());
        assert!(convergence_order(0.1, -1.0).is_err());
    }

    #[test]
    fn level_validation() {
        assert!(check_levels(&[16], Some(64)).is_err());
        assert!(check_levels(&[16, 16], Some(64)).is_err());
        assert!(check_levels(&[16, 32], Some(32)).is_err());
        assert!(check_levels(&[16, 24], Some(64)).is_err());
        assert!(check_levels(&[16, 32], Some(64)).is_ok());
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0].iter().map(|&x| (x, 3.0 * x * x * x)).collect();
        assert!((loglog_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn energy_trajectory_modes_agree() {
        let grid = TimeGrid::new(1.0, 300).unwrap();
        let p = LoadProgram::Sinusoid {
            amplitude: 1.0,
            omega: PI,
        };
        let d = energy_trajectory(&p, &grid, order(0.5), 1.0, EnergyMode::Direct).unwrap();
        let f = energy_trajectory(&p, &grid, order(0.5), 1.0, EnergyMode::Fft).unwrap();
        for (a, b) in d.iter().zip(&f) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn benchmark_single_size_has_no_slope() {
        let t = benchmark_complexity(&[32], EnergyMode::Fft, 1).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.slope.is_none());
        assert!(benchmark_complexity(&[], EnergyMode::Fft, 1).is_err());
        assert!(benchmark_complexity(&[64, 32], EnergyMode::Fft, 1).is_err());
        assert!(benchmark_complexity(&[32], EnergyMode::Fft, 0).is_err());
    }

    #[test]
    fn sweep_preserves_order_and_matches_serial() {
        let base = MaterialParams {
            e_pseudo: 50.0,
            beta_e: order(0.5),
            k_pseudo: 10.0,
            beta_k: order(0.5),
            hardening: 0.0,
            yield_stress: 1.0,
            damage_strength: 1e-4,
            damage_exponent: 1.0,
        };
        let jobs: Vec<SimulationJob> = [0.3, 0.5, 0.7]
            .iter()
            .map(|&bk| SimulationJob {
                params: MaterialParams {
                    beta_k: order(bk),
                    ..base
                },
                grid: TimeGrid::new(0.03125, 64).unwrap(),
                program: LoadProgram::LinearRamp { rate: 0.64 },
                mode: EnergyMode::Direct,
            })
            .collect();
        let par = simulate_many(&jobs, 3);
        let ser = simulate_many(&jobs, 1);
        for (a, b) in par.iter().zip(&ser) {
            assert_eq!(a.as_ref().unwrap().history, b.as_ref().unwrap().history);
        }
    }
}
