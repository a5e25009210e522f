//! Command-line interface definition.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, parse_config_str, Command, RunConfig};
use crate::run::{run, RunReport};
use crate::CliError;
use eitsim_core::lineshape::VelocityAverage;

#[derive(Parser)]
#[command(name = "eitsim", version, about = "Ladder EIT spectra and polarization rotation in warm rubidium")]
pub struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Transmission spectrum with and without control, plus window metrics
    Spectrum(RunArgs),
    /// Crossed/parallel analyzer spectra from σ± pathways
    Rotate(RunArgs),
    /// Least-squares fit of model parameters to a sampled spectrum
    Fit(RunArgs),
    /// Spectra over a list of control powers
    Sweep(RunArgs),
    /// Atomic data as JSON
    #[command(name = "atoms-dump")]
    AtomsDump(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the configuration
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots
    #[arg(long)]
    plot: bool,
    /// Use Gauss–Hermite velocity averaging of this order instead of the closed form
    #[arg(long)]
    quadrature_order: Option<usize>,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(command: Command, args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut config = parse_config(&args.config)?;
    if config.command != command {
        return Err(CliError::Config(format!(
            "configuration is for `{}` but `{}` was requested",
            config.command.name(),
            command.name()
        )));
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    config.plot |= args.plot;
    if let Some(order) = args.quadrature_order {
        config.scenario.velocity_average = VelocityAverage::GaussHermite { order };
        config
            .scenario
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(config)
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from_args<I, T>(args: I) -> Result<RunReport, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    execute(cli)
}

pub fn execute(cli: Cli) -> Result<RunReport, CliError> {
    let config = match &cli.command {
        Cmd::Spectrum(a) => load(Command::Spectrum, a)?,
        Cmd::Rotate(a) => load(Command::Rotate, a)?,
        Cmd::Fit(a) => load(Command::Fit, a)?,
        Cmd::Sweep(a) => load(Command::Sweep, a)?,
        Cmd::AtomsDump(a) => {
            let mut c = match &a.config {
                Some(p) => parse_config(p)?,
                None => parse_config_str(r#"{"command": "atoms-dump"}"#, std::path::Path::new("."))?,
            };
            c.command = Command::AtomsDump;
            if let Some(out) = &a.out {
                c.out_dir = out.clone();
            }
            c
        }
    };
    run(&config)
}
