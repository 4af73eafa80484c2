//! End-to-end runs of the `fracvep` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fracvep"));
    cmd.env_remove(fracvep_cli::WORKERS_ENV);
    cmd
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

const MATERIAL: &str = r#"
[material]
E_pseudo_pa_s_betaE = 50.0
beta_E = 0.5
K_pseudo_pa_s_betaK = 10.0
beta_K = 0.5
H_pa = 0.0
tau_Y_pa = 1.0
S_pa = 1e-4
s = 1.0
"#;

fn monotone(steps: usize, run: &str) -> String {
    format!(
        "{MATERIAL}\n[grid]\nT_s = 0.03125\nsteps = {steps}\n\n[load]\nkind = \"linear_ramp\"\nrate_per_s = 0.64\n\n[run]\n{run}\n"
    )
}

fn first_line(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    format!("{}\n", text.lines().next().unwrap())
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn simulate_writes_pinned_csv_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m.toml", &monotone(256, ""));
    let csv = dir.path().join("run.csv");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(first_line(&csv), golden("simulate_header.csv"));

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 258);
    // 17 significant digits
    let t1 = text.lines().nth(2).unwrap().split(',').nth(1).unwrap();
    assert_eq!(t1, "1.2207031250000000e-4");

    let tau = column(&csv, "tau");
    let eps = column(&csv, "eps");
    let peak = tau.iter().cloned().fold(f64::MIN, f64::max);
    assert!(peak > 1.0 && *tau.last().unwrap() > 0.0);
    assert!((eps[256] - 0.02).abs() < 1e-15);

    let summary = std::fs::read_to_string(dir.path().join("run.summary.toml")).unwrap();
    assert!(summary.contains("status = \"completed\""), "{summary}");
    assert!(summary.contains("final_damage = "));
    assert!(summary.contains("wall_time_s = "));
}

#[test]
fn zero_amplitude_gives_zero_columns() {
    let dir = TempDir::new().unwrap();
    let text = format!("{MATERIAL}\n[grid]\nT_s = 1.0\nsteps = 40\n\n[load]\nkind = \"sinusoid\"\namplitude = 0.0\nomega_rad_per_s = 3.0\n");
    let cfg = write_config(&dir, "z.toml", &text);
    let csv = dir.path().join("z.csv");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["eps", "eps_ve", "eps_vp", "alpha", "tau", "D", "Y_ve"] {
        assert!(column(&csv, name).iter().all(|&v| v == 0.0), "{name}");
    }
}

#[test]
fn material_failure_exits_zero() {
    let dir = TempDir::new().unwrap();
    let text = r#"
[material]
E_pseudo_pa_s_betaE = 25.0
beta_E = 0.7
K_pseudo_pa_s_betaK = 10.0
beta_K = 0.7
tau_Y_pa = 1.0
S_pa = 1.0
s = 1.0

[grid]
T_s = 1.0
steps = 3200

[load]
kind = "triangle_wave"
amplitude = 0.1
omega_rad_per_s = 25.132741228718345
"#;
    let cfg = write_config(&dir, "c.toml", text);
    let csv = dir.path().join("c.csv");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = std::fs::read_to_string(dir.path().join("c.summary.toml")).unwrap();
    assert!(summary.contains("status = \"failed_at_step\""), "{summary}");
    assert!(summary.contains("failed_at_step = "));
}

#[test]
fn invalid_config_exits_one_with_field_name() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "bad.toml",
        &monotone(64, "").replace("beta_K = 0.5", "beta_K = 1.5"),
    );
    let out = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("[material] beta_K"), "{}", stderr(&out));

    let cfg = write_config(&dir, "bad2.toml", &monotone(64, "energy_mode = \"fast\""));
    let out = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("energy_mode"));

    let out = bin()
        .args(["simulate", "--config", "/definitely/missing.toml"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&bin().output().unwrap()), 1);
    assert_eq!(code(&bin().arg("frobnicate").output().unwrap()), 1);
    assert_eq!(
        code(
            &bin()
                .args(["simulate", "--config", "x", "--mode", "slow"])
                .output()
                .unwrap()
        ),
        1
    );
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
    assert_eq!(code(&bin().arg("--version").output().unwrap()), 0);
}

#[test]
fn unwritable_output_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m.toml", &monotone(32, ""));
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("missing/dir/run.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn converge_prints_order_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m.toml", &monotone(1024, "coarsest_steps = 16\nlevels = 3"));
    let table = dir.path().join("conv.csv");
    let out = bin()
        .args(["converge", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&table)
        .env(fracvep_cli::WORKERS_ENV, "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(first_line(&table), golden("converge_header.csv"));
    let orders: Vec<f64> = stdout(&out)
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(orders.len(), 2);
    assert!(orders.iter().all(|o| (o - 1.0).abs() < 0.3), "{orders:?}");
}

#[test]
fn converge_free_energy_quadratic_meets_bound() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{MATERIAL}\n[grid]\nT_s = 1.0\nsteps = 512\n\n[load]\nkind = \"quadratic_ramp\"\nT_s = 1.0\n\n[run]\nobservable = \"free_energy\"\ncoarsest_steps = 64\n"
    )
    .replace("E_pseudo_pa_s_betaE = 50.0", "E_pseudo_pa_s_betaE = 100.0");
    let cfg = write_config(&dir, "q.toml", &text);
    let out = bin()
        .args(["converge", "--config"])
        .arg(&cfg)
        .args(["--levels", "4"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let orders: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(orders.len(), 3);
    assert!(orders.iter().all(|&o| o >= 1.4), "{orders:?}");
}

#[test]
fn converge_rejects_levels_reaching_the_reference() {
    let dir = TempDir::new().unwrap();
    // levels 64 and 128 against a 64-step reference: the first has the reference dt
    let cfg = write_config(&dir, "m.toml", &monotone(64, "coarsest_steps = 64"));
    let out = bin()
        .args(["converge", "--config"])
        .arg(&cfg)
        .args(["--levels", "2"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let out = bin()
        .args(["converge", "--config"])
        .arg(&cfg)
        .args(["--levels", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn bad_worker_override_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m.toml", &monotone(64, "coarsest_steps = 8"));
    let out = bin()
        .args(["converge", "--config"])
        .arg(&cfg)
        .env(fracvep_cli::WORKERS_ENV, "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn energy_series_tracks_closed_form() {
    let dir = TempDir::new().unwrap();
    let text = format!("{MATERIAL}\n[grid]\nT_s = 1.0\nsteps = 300\n\n[load]\nkind = \"quadratic_ramp\"\nT_s = 1.0\n");
    let cfg = write_config(&dir, "q.toml", &text);
    let csv = dir.path().join("e.csv");
    let out = bin()
        .args(["energy", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .args(["--mode", "fft"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(first_line(&csv), golden("energy_fft_header.csv"));
    let psi = column(&csv, "psi_fft");
    let exact = column(&csv, "psi_exact");
    assert_eq!(psi.len(), 301);
    assert!((psi[300] - exact[300]).abs() < 1e-3 * exact[300]);
}

#[test]
fn energy_hookean_limit() {
    let dir = TempDir::new().unwrap();
    let text =
        format!("{MATERIAL}\n[grid]\nT_s = 1.0\nsteps = 200\n\n[load]\nkind = \"linear_ramp\"\nrate_per_s = 0.5\n")
            .replace("beta_E = 0.5", "beta_E = 0.001");
    let cfg = write_config(&dir, "h.toml", &text);
    let csv = dir.path().join("h.csv");
    let out = bin()
        .args(["energy", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let eps = column(&csv, "eps");
    let psi = column(&csv, "psi_direct");
    for (e, p) in eps.iter().zip(&psi).skip(1) {
        let spring = 50.0 * e * e / 2.0;
        assert!((p - spring).abs() < 5e-3 * spring, "{p} vs {spring}");
    }
}

#[test]
fn bench_single_size_omits_slope() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("b.csv");
    let out = bin()
        .args(["bench", "--sizes", "32", "--mode", "fft", "--out"])
        .arg(&table)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(first_line(&table), golden("bench_header.csv"));
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(','));
    assert!(stdout(&out).contains("slope omitted"));

    let out = bin()
        .args(["bench", "--sizes", "32,64", "--mode", "direct"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("# direct slope"));
    assert_eq!(code(&bin().args(["bench", "--sizes", "64,32"]).output().unwrap()), 1);
}
