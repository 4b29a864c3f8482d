//! Command-line front end for the time-boundary Bell-state simulations.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;
use crate::output::{ManifestBuilder, OutputDir};

#[derive(Debug, Parser)]
#[command(name = "ssh-bell", version, about = "Momentum-space Bell states from time boundaries in SSH chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Embedded configuration (see `ssh-bell preset --list`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the noise seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Cross-check against the dense solvers.
    #[arg(long)]
    oracle: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Band structure, scattering probabilities and angles.
    Bands(RunArgs),
    /// Time-resolved scattering with band-pair projections.
    Scatter(RunArgs),
    /// Entropy and success probability under uniform particle loss.
    Decohere(RunArgs),
    /// Fidelity statistics over a grid of noise amplitudes.
    NoiseSweep(RunArgs),
    /// Multiband scattering with all band-pair projections.
    Multiband(RunArgs),
    /// Bell-condition curve, entropy versus wave-number spread, entropy maps.
    BellMap(RunArgs),
    /// Prints an embedded configuration.
    Preset {
        name: Option<String>,
        #[arg(long)]
        list: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Numerical,
    Io,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { kind: FailureKind::Config, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Failure { kind: FailureKind::Numerical, message: message.into() }
    }

    fn exit_code(&self) -> u8 {
        match self.kind {
            FailureKind::Config => 2,
            FailureKind::Numerical => 3,
            FailureKind::Io => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            FailureKind::Config => "configuration error",
            FailureKind::Numerical => "numerical error",
            FailureKind::Io => "i/o error",
        };
        write!(f, "{what}: {}", self.message)
    }
}

impl From<ssh_bell::Error> for Failure {
    fn from(e: ssh_bell::Error) -> Self {
        if e.is_numerical() {
            Failure::numerical(e.to_string())
        } else {
            Failure::config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { kind: FailureKind::Io, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure { kind: FailureKind::Io, message: e.to_string() }
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, Failure> {
    let text = match (&args.config, &args.preset) {
        (Some(path), None) => std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(name)) => config::preset(name)?.to_string(),
        _ => return Err(Failure::config("pass exactly one of --config or --preset")),
    };
    RunConfig::parse(&text)
}

fn run_command(name: &str, args: &RunArgs, f: fn(Context, Option<u64>) -> Result<(), Failure>) -> Result<(), Failure> {
    let cfg = load(args)?;
    let workers = match args.workers {
        Some(0) => return Err(Failure::config("--workers must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure { kind: FailureKind::Io, message: e.to_string() })?;
    let mut out = OutputDir::create(&args.out)?;
    let mut manifest = ManifestBuilder::start(name);
    pool.install(|| {
        f(Context { cfg: &cfg, out: &mut out, manifest: &mut manifest, oracle: args.oracle }, args.seed)
    })?;
    let mut echoed = cfg.clone();
    if let (Some(seed), Some(noise)) = (args.seed, echoed.noise.as_mut()) {
        noise.seed = seed;
    }
    manifest.finish(echoed, workers, &mut out)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bands(a) => run_command("bands", &a, |c, _| commands::bands(c)),
        Command::Scatter(a) => run_command("scatter", &a, |c, _| commands::scatter(c)),
        Command::Decohere(a) => run_command("decohere", &a, |c, _| commands::decohere(c)),
        Command::NoiseSweep(a) => run_command("noise-sweep", &a, commands::noise_sweep),
        Command::Multiband(a) => run_command("multiband", &a, |c, _| commands::multiband(c)),
        Command::BellMap(a) => run_command("bell-map", &a, |c, _| commands::bell_map(c)),
        Command::Preset { name, list } => match (name, list) {
            (_, true) => {
                for (n, _) in config::PRESETS {
                    println!("{n}");
                }
                Ok(())
            }
            (Some(n), false) => commands::show_preset(&n, std::io::stdout().lock()),
            (None, false) => Err(Failure::config("name a preset or pass --list")),
        },
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ssh-bell: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
