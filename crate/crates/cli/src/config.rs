//! Run configuration file.
//!
//! ```toml
//! [material]
//! E_pseudo_pa_s_betaE = 50.0
//! beta_E = 0.5
//! K_pseudo_pa_s_betaK = 10.0
//! beta_K = 0.5
//! H_pa = 0.0
//! tau_Y_pa = 1.0
//! S_pa = 1e-4
//! s = 1.0
//!
//! [grid]
//! T_s = 0.03125
//! steps = 2048
//!
//! [load]
//! kind = "linear_ramp"     # linear_ramp | quadratic_ramp | sinusoid | triangle_wave
//! rate_per_s = 0.64
//!
//! [run]
//! energy_mode = "auto"     # direct | fft | auto
//! output_path = "monotone.csv"
//! observable = "stress"    # stress | free_energy (converge only)
//! levels = 5
//! coarsest_steps = 16
//! ```
//!
//! `quadratic_ramp` takes `T_s`; `sinusoid` and `triangle_wave` take `amplitude`
//! and `omega_rad_per_s`. The `[run]` section and all its keys are optional.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use fracvep_core::{EnergyMode, Error as CoreError, FractionalOrder, LoadProgram, MaterialParams, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_OUTPUT: &str = "fracvep.csv";
pub const DEFAULT_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Observable {
    #[default]
    Stress,
    FreeEnergy,
}

impl Observable {
    pub fn as_str(self) -> &'static str {
        match self {
            Observable::Stress => "stress",
            Observable::FreeEnergy => "free_energy",
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Observable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stress" => Ok(Observable::Stress),
            "free_energy" => Ok(Observable::FreeEnergy),
            other => Err(format!("expected stress or free_energy, got `{other}`")),
        }
    }
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub material: MaterialParams,
    pub grid: TimeGrid,
    pub load: LoadProgram,
    pub energy_mode: EnergyMode,
    pub output_path: String,
    pub observable: Observable,
    /// Number of coarse grids in a convergence study.
    pub levels: usize,
    /// Steps of the coarsest grid; the others double it.
    pub coarsest_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialSection {
    #[serde(rename = "E_pseudo_pa_s_betaE")]
    e_pseudo: f64,
    #[serde(rename = "beta_E")]
    beta_e: f64,
    #[serde(rename = "K_pseudo_pa_s_betaK")]
    k_pseudo: f64,
    #[serde(rename = "beta_K")]
    beta_k: f64,
    #[serde(rename = "H_pa", default)]
    hardening: f64,
    #[serde(rename = "tau_Y_pa")]
    yield_stress: f64,
    #[serde(rename = "S_pa")]
    damage_strength: f64,
    #[serde(rename = "s")]
    damage_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(rename = "T_s")]
    t_final: f64,
    steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LoadSection {
    LinearRamp {
        rate_per_s: f64,
    },
    QuadraticRamp {
        #[serde(rename = "T_s")]
        t_final: f64,
    },
    Sinusoid {
        amplitude: f64,
        omega_rad_per_s: f64,
    },
    TriangleWave {
        amplitude: f64,
        omega_rad_per_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    observable: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coarsest_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    material: MaterialSection,
    grid: GridSection,
    load: LoadSection,
    #[serde(default)]
    run: RunSection,
}

/// Maps a core parameter name to the config key that feeds it.
fn config_key(name: &str) -> &'static str {
    match name {
        "E_pseudo" => "[material] E_pseudo_pa_s_betaE",
        "beta_E" => "[material] beta_E",
        "K_pseudo" => "[material] K_pseudo_pa_s_betaK",
        "beta_K" => "[material] beta_K",
        "H" => "[material] H_pa",
        "tau_Y" => "[material] tau_Y_pa",
        "S" => "[material] S_pa",
        "s" => "[material] s",
        "T" => "T_s",
        "N" => "[grid] steps",
        "rate" => "[load] rate_per_s",
        "amplitude" => "[load] amplitude",
        "omega" => "[load] omega_rad_per_s",
        _ => "config",
    }
}

fn field_error(section: &str, err: CoreError) -> CliError {
    match err {
        CoreError::InvalidParameter { name, reason } => {
            let key = config_key(name);
            let key = if key.starts_with('[') {
                key.to_string()
            } else {
                format!("[{section}] {key}")
            };
            CliError::Usage(format!("invalid config: {key}: {reason}"))
        }
        other => CliError::Usage(format!("invalid config: [{section}]: {other}")),
    }
}

fn order(section: &str, key: &str, beta: f64) -> Result<FractionalOrder, CliError> {
    FractionalOrder::new(beta).map_err(|_| {
        CliError::Usage(format!(
            "invalid config: [{section}] {key}: must lie in (0, 1), got {beta}"
        ))
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {}", e.message())))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_file(file: ConfigFile) -> Result<Self, CliError> {
        let m = &file.material;
        let material = MaterialParams {
            e_pseudo: m.e_pseudo,
            beta_e: order("material", "beta_E", m.beta_e)?,
            k_pseudo: m.k_pseudo,
            beta_k: order("material", "beta_K", m.beta_k)?,
            hardening: m.hardening,
            yield_stress: m.yield_stress,
            damage_strength: m.damage_strength,
            damage_exponent: m.damage_exponent,
        };
        material.validate().map_err(|e| field_error("material", e))?;

        let grid = TimeGrid::new(file.grid.t_final, file.grid.steps).map_err(|e| field_error("grid", e))?;

        let load = match file.load {
            LoadSection::LinearRamp { rate_per_s } => LoadProgram::LinearRamp { rate: rate_per_s },
            LoadSection::QuadraticRamp { t_final } => LoadProgram::QuadraticRamp { t_final },
            LoadSection::Sinusoid {
                amplitude,
                omega_rad_per_s,
            } => LoadProgram::Sinusoid {
                amplitude,
                omega: omega_rad_per_s,
            },
            LoadSection::TriangleWave {
                amplitude,
                omega_rad_per_s,
            } => LoadProgram::TriangleWave {
                amplitude,
                omega: omega_rad_per_s,
            },
        };
        load.validate().map_err(|e| field_error("load", e))?;

        let run = file.run;
        let energy_mode = match run.energy_mode.as_deref() {
            None => EnergyMode::Auto,
            Some(s) => s.parse().map_err(|_| {
                CliError::Usage(format!(
                    "invalid config: [run] energy_mode: expected direct, fft or auto, got `{s}`"
                ))
            })?,
        };
        let observable = match run.observable.as_deref() {
            None => Observable::Stress,
            Some(s) => s
                .parse()
                .map_err(|e| CliError::Usage(format!("invalid config: [run] observable: {e}")))?,
        };
        let output_path = run.output_path.unwrap_or_else(|| DEFAULT_OUTPUT.to_string());
        if output_path.is_empty() {
            return Err(CliError::Usage(
                "invalid config: [run] output_path: must not be empty".into(),
            ));
        }
        let levels = run.levels.unwrap_or(DEFAULT_LEVELS);
        if levels < 2 {
            return Err(CliError::Usage(format!(
                "invalid config: [run] levels: at least 2 are needed, got {levels}"
            )));
        }
        if run.coarsest_steps == Some(0) {
            return Err(CliError::Usage(
                "invalid config: [run] coarsest_steps: must be positive".into(),
            ));
        }
        Ok(Self {
            material,
            grid,
            load,
            energy_mode,
            output_path,
            observable,
            levels,
            coarsest_steps: run.coarsest_steps,
        })
    }

    fn to_file(&self) -> ConfigFile {
        let m = &self.material;
        let load = match self.load {
            LoadProgram::LinearRamp { rate } => LoadSection::LinearRamp { rate_per_s: rate },
            LoadProgram::QuadraticRamp { t_final } => LoadSection::QuadraticRamp { t_final },
            LoadProgram::Sinusoid { amplitude, omega } => LoadSection::Sinusoid {
                amplitude,
                omega_rad_per_s: omega,
            },
            LoadProgram::TriangleWave { amplitude, omega } => LoadSection::TriangleWave {
                amplitude,
                omega_rad_per_s: omega,
            },
        };
        ConfigFile {
            material: MaterialSection {
                e_pseudo: m.e_pseudo,
                beta_e: m.beta_e.value(),
                k_pseudo: m.k_pseudo,
                beta_k: m.beta_k.value(),
                hardening: m.hardening,
                yield_stress: m.yield_stress,
                damage_strength: m.damage_strength,
                damage_exponent: m.damage_exponent,
            },
            grid: GridSection {
                t_final: self.grid.t_final(),
                steps: self.grid.steps(),
            },
            load,
            run: RunSection {
                energy_mode: Some(self.energy_mode.as_str().to_string()),
                output_path: Some(self.output_path.clone()),
                observable: Some(self.observable.as_str().to_string()),
                levels: Some(self.levels),
                coarsest_steps: self.coarsest_steps,
            },
        }
    }

    /// Serializes back to the config file format.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config sections serialize")
    }

    /// Coarse step counts of a convergence study. Free-energy studies of a quadratic
    /// ramp compare with the closed form and need no reference, so the grid's own
    /// step count is the finest level; otherwise the levels must coarsen it.
    pub fn convergence_levels(&self, levels: usize, needs_reference: bool) -> Result<Vec<usize>, CliError> {
        if levels < 2 {
            return Err(CliError::Usage(format!(
                "--levels: at least 2 are needed, got {levels}"
            )));
        }
        let shift = u32::try_from(levels - 1)
            .ok()
            .filter(|&s| s < usize::BITS)
            .ok_or_else(|| CliError::Usage(format!("--levels: {levels} is too large")))?;
        let finest = if needs_reference {
            self.grid.steps() / 2
        } else {
            self.grid.steps()
        };
        let coarsest = match self.coarsest_steps {
            Some(c) => c,
            None => finest >> shift,
        };
        if coarsest == 0 {
            return Err(CliError::Usage(format!(
                "--levels: {levels} halvings of {} steps leave an empty grid",
                self.grid.steps()
            )));
        }
        (0..levels)
            .map(|k| coarsest.checked_shl(k as u32).filter(|v| v >> k == coarsest))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| CliError::Usage("levels overflow the step count".into()))
    }
}
