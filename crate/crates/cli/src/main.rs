#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Optical forces on beads in a two-mode waveguide.
#[derive(Debug, Parser)]
#[command(name = "fibertractor", version)]
struct Cli {
    /// JSON config with one section per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, env = "FT_THREADS", default_value_t = 0)]
    threads: usize,
    /// Override a config value, e.g. `--set force_chain.count=3`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Force on a single bead over a parameter sweep.
    ForceSingle,
    /// Forces on a chain of identical beads versus their spacing.
    ForceChain,
    /// Equal-force separations of two beads and their stability.
    Equilibria,
    /// Stable tractor separations versus transmission.
    BindingCurve,
    /// Minimal stable force over the (t12, r12) plane.
    StabilityMap,
    /// Paraxial coupling coefficients of a spherical bead.
    EstimateCoupling,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ForceSingle => "force-single",
            Command::ForceChain => "force-chain",
            Command::Equilibria => "equilibria",
            Command::BindingCurve => "binding-curve",
            Command::StabilityMap => "stability-map",
            Command::EstimateCoupling => "estimate-coupling",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = config::load(cli.config.as_deref(), &cli.overrides)?;
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    let table = match cli.command {
        Command::ForceSingle => commands::force_single(&cfg)?,
        Command::ForceChain => commands::force_chain(&cfg)?,
        Command::Equilibria => commands::equilibria(&cfg)?,
        Command::BindingCurve => commands::binding_curve(&cfg)?,
        Command::StabilityMap => commands::stability_map(&cfg)?,
        Command::EstimateCoupling => commands::estimate(&cfg)?,
    };
    let resolved = serde_json::to_value(&cfg).expect("config serialises");
    let text = match cli.format {
        Format::Csv => table.to_csv(cli.command.name(), &resolved),
        Format::Json => table.to_json(cli.command.name(), &resolved),
    };
    match &cli.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fibertractor: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
