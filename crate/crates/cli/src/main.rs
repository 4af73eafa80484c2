use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracvep_cli::config::RunConfig;
use fracvep_cli::{commands, worker_count, CliError};
use fracvep_core::EnergyMode;

/// Fractional visco-elasto-plasticity with memory-dependent damage.
#[derive(Debug, Parser)]
#[command(name = "fracvep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration file ([material], [grid], [load], [run]).
    #[arg(long)]
    config: PathBuf,
    /// Output path; overrides [run] output_path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Free-energy evaluation; overrides [run] energy_mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<EnergyMode>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the return mapping and write the state history as CSV plus a summary.
    Simulate(Common),
    /// Convergence table against a fine reference (or the closed form).
    Converge {
        #[command(flatten)]
        common: Common,
        /// Number of coarse grids; overrides [run] levels.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Time full free-energy trajectories and fit log-log slopes.
    Bench {
        /// Comma-separated step counts.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Restrict to one mode (default: direct and fft).
        #[arg(long, value_parser = parse_mode)]
        mode: Option<EnergyMode>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Free-energy series of the load program.
    Energy(Common),
}

fn parse_mode(s: &str) -> Result<EnergyMode, String> {
    s.parse()
        .map_err(|_| format!("expected direct, fft or auto, got `{s}`"))
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(mode) = common.mode {
        config.energy_mode = mode;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate(common) => commands::simulate(&load(&common)?, common.out.as_deref()),
        Command::Converge { common, levels } => {
            let config = load(&common)?;
            let workers = worker_count()?;
            commands::converge(&config, levels.unwrap_or(config.levels), common.out.as_deref(), workers)
        }
        Command::Bench { sizes, mode, out } => {
            let sizes = sizes.unwrap_or_else(commands::default_bench_sizes);
            let modes = match mode {
                Some(m) => vec![m],
                None => vec![EnergyMode::Direct, EnergyMode::Fft],
            };
            commands::bench(&sizes, &modes, out.as_deref())
        }
        Command::Energy(common) => commands::energy(&load(&common)?, common.out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fracvep: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
