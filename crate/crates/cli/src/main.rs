//! `gaussmarg`: identity verification, ensemble sampling, Page slopes and Hawking presets.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gaussmarg", version, about = "Constrained pure Gaussian state ensembles")]
struct Cli {
    /// Directory for outputs and run manifests.
    #[arg(long, global = true, env = "GAUSSMARG_OUT_DIR", default_value = "gaussmarg-out")]
    out_dir: PathBuf,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the closed-form identities against independent routes.
    Verify(VerifyArgs),
    /// Sample the constrained ensemble from a TOML config.
    Sample(SampleArgs),
    /// Cumulative small-subsystem entropy for a constraint file.
    PageSlope(PageSlopeArgs),
    /// Mode count and constraint file for an evaporating black hole.
    Hawking(HawkingArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SuiteArg {
    All,
    Replica,
    Saddle,
    Fock,
    Analytic,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: SuiteArg,
    /// Tolerance override, e.g. `replica.master_determinant=1e-12`. Repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tolerances: Vec<String>,
    #[arg(long, default_value_t = 1_000_000)]
    prefactor_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Sampler config (TOML).
    config: PathBuf,
}

#[derive(Debug, Args)]
pub struct PageSlopeArgs {
    /// Constraint file (TOML).
    spec: PathBuf,
    /// Mode order in which the subsystem grows, comma separated; defaults to 0,1,2,...
    #[arg(long, value_delimiter = ',')]
    ordering: Option<Vec<usize>>,
    /// Output CSV name inside the output directory.
    #[arg(long, default_value = "page_slope.csv")]
    out: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PrescriptionArg {
    Exp,
    Coth,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mass_unit").required(true).args(["mass", "mass_planck"])))]
pub struct HawkingArgs {
    /// Initial mass in solar masses.
    #[arg(long)]
    mass: Option<f64>,
    /// Initial mass in Planck masses.
    #[arg(long)]
    mass_planck: Option<f64>,
    /// Mass radiated per window, in Planck masses.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// Half-open window range `a..b`; defaults to every window.
    #[arg(long)]
    windows: Option<String>,
    #[arg(long, value_enum, default_value = "exp")]
    prescription: PrescriptionArg,
    /// Report the mode count without writing a constraint file.
    #[arg(long)]
    count_only: bool,
    /// Largest number of modes written to a constraint file.
    #[arg(long, default_value_t = 10_000)]
    mode_cap: usize,
    /// Output constraint file name inside the output directory.
    #[arg(long, default_value = "hawking_spec.toml")]
    out: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Verify(a) => commands::verify(a, &cli.out_dir),
        Command::Sample(a) => commands::sample(a, &cli.out_dir),
        Command::PageSlope(a) => commands::page_slope(a, &cli.out_dir),
        Command::Hawking(a) => commands::hawking(a, &cli.out_dir),
    };
    match result {
        Ok(code) => code.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code_for(&e).into()
        }
    }
}
