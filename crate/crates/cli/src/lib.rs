//! `swapsim` command-line frontend.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

mod commands;
pub mod manifest;
pub mod reproduce;

pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Overrides the scenario seed when set.
pub const SEED_ENV: &str = "SWAPSIM_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("cannot load scenario `{path}`: {source}")]
    Scenario {
        path: String,
        #[source]
        source: swapsim_core::Error,
    },
    #[error(transparent)]
    Core(#[from] swapsim_core::Error),
    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} of the reproduction rows failed")]
    RowsFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Scenario { .. } => EXIT_VALIDATION,
            CliError::Core(e) if e.is_validation() => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        }
    }
}

macro_rules! core_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

core_error_from!(
    swapsim_core::ValidationError,
    swapsim_core::curve::CurveError,
    swapsim_core::docksim::DockError,
    swapsim_core::hull::HullError,
    swapsim_core::optimize::OptimizeError,
    swapsim_core::coverage::CoverageError,
    swapsim_core::thermal::ThermalError,
    swapsim_core::fleetsim::FleetError
);

#[derive(Debug, Parser)]
#[command(
    name = "swapsim",
    version,
    about = "Docking-guide design, hub coverage, cooling and fleet swap simulation for battery-swapping rovers",
    propagate_version = true
)]
pub struct Cli {
    /// Scenario file, or `canonical` for the built-in scenario.
    #[arg(long, global = true, default_value = "canonical")]
    pub scenario: String,
    /// Seed override; takes precedence over SWAPSIM_SEED and the scenario.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopologyArg {
    Chain,
    Hex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BodyArg {
    Rover,
    Battery,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discretize a guide curve.
    Curve {
        /// Throat tangent angle, degrees (default: scenario curve).
        #[arg(long)]
        theta: Option<f64>,
        /// Control-point weight in [0, 1] (default: scenario curve).
        #[arg(long)]
        weight: Option<f64>,
        /// Chord tolerance, m (default: scenario port).
        #[arg(long)]
        chord_error: Option<f64>,
        /// Write the profile as x,y CSV.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Simulate one docking entry.
    Dock {
        /// Start pose as "x,y,yaw" (m, m, degrees).
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
        #[arg(long)]
        bumpers: bool,
        /// Use the baseline curve instead of the scenario curve.
        #[arg(long)]
        baseline: bool,
        /// Write the trajectory CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Grid-search the guide curve and compare success regions.
    Optimize {
        /// Grid steps as "theta-step,w-step".
        #[arg(long)]
        grid: Option<String>,
        /// Monte-Carlo samples per region.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-hub coverage geometry.
    Coverage {
        #[arg(long, value_enum, default_value = "hex")]
        topology: TopologyArg,
        #[arg(long, default_value_t = 3)]
        hubs: usize,
        /// Chain spacing, m (default: r_h·√3).
        #[arg(long)]
        spacing: Option<f64>,
        /// Union-area samples (default: scenario).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Radiative cooldown of the rover or a battery module.
    Thermal {
        #[arg(long, value_enum, default_value = "rover")]
        body: BodyArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fleet sizing and swap simulation.
    Fleet {
        /// Fleet size (default: sizing result, at least 1).
        #[arg(long)]
        rovers: Option<usize>,
        /// Simulated hours (default: scenario duration).
        #[arg(long)]
        hours: Option<f64>,
        /// TOML failure profile.
        #[arg(long)]
        fail_profile: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        ports: usize,
        #[arg(long)]
        terminals: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every study on the scenario and compare with reported values.
    Reproduce {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parse `argv` (including the program name) and run it. Summaries go to
/// `out`, diagnostics to `err`.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_VALIDATION
                }
            };
        }
    };
    let command_line = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let result = match cli.jobs {
        Some(0) => Err(CliError::Validation("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => {
                let mut buf = Vec::new();
                let r = pool.install(|| commands::run(&cli, &command_line, &mut buf));
                let _ = out.write_all(&buf);
                r
            }
            Err(e) => Err(CliError::Validation(format!(
                "cannot start {n} workers: {e}"
            ))),
        },
        None => commands::run(&cli, &command_line, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
