//! Command-line front end: argument parsing, configuration resolution,
//! dispatch to the subcommands and the exit-code convention
//! (0 ok, 2 tolerance failure, 3 input error, 4 budget exceeded).

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
use config::{Overrides, RunConfig, ToleranceProfile};
use report::{summary_text, write_outputs, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "centeriso",
    version,
    about = "Equilibrium states of center isometries over the cat map"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; per-check seeds are derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, global = true)]
    pub tolerance_profile: Option<ToleranceProfile>,
    /// Output directory (default: `out/<config name>`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Pressure by leaf growth, spanning sets and entropy plus integral.
    Pressure,
    /// The weighted unstable-leaf measure at the anchor.
    LeafMeasure,
    /// Every applicable property check.
    Verify,
    /// Draw points from the equilibrium state.
    Sample,
    /// The Gibbs ratio ladder at the anchor.
    Gibbs,
    /// Decay of correlations.
    Correlation,
    /// Periodic-orbit sums of the potential.
    Livsic,
    /// The truncated coboundary series with Liouville frequencies.
    AppendixD,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::LeafMeasure => "leaf-measure",
            Command::Verify => "verify",
            Command::Sample => "sample",
            Command::Gibbs => "gibbs",
            Command::Correlation => "correlation",
            Command::Livsic => "livsic",
            Command::AppendixD => "appendix-d",
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget { .. } | Error::Starvation { .. } => EXIT_BUDGET,
        Error::Tolerance(_)
        | Error::Convergence { .. }
        | Error::Truncation { .. }
        | Error::Locality(_)
        | Error::Precision(_) => EXIT_TOLERANCE,
        Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::Guard { .. }
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Io(_)
        | Error::Unsupported(_) => EXIT_INPUT,
    }
}

/// Runs one command on a resolved configuration.
pub fn dispatch(command: Command, r: &config::Resolved) -> crate::Result<Outcome> {
    match command {
        Command::Pressure => commands::pressure(r),
        Command::LeafMeasure => commands::leaf_measure_cmd(r),
        Command::Verify => commands::verify(r),
        Command::Sample => commands::sample(r),
        Command::Gibbs => commands::gibbs(r),
        Command::Correlation => commands::correlation(r),
        Command::Livsic => commands::livsic(r),
        Command::AppendixD => commands::appendix_d(r),
    }
}

/// Parses `args` (including the program name), runs the command, writes
/// the report and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> crate::Result<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("--config <file.json> is required".into()))?;
    let cfg = RunConfig::from_path(path)?;
    let base = path.parent().map(|d| d.to_path_buf());
    let overrides = Overrides {
        seed: cli.seed,
        threads: cli.threads,
        tolerance_profile: cli.tolerance_profile,
        output_dir: cli.out.clone(),
    };
    let resolved = cfg.resolve(&overrides, base.as_deref())?;
    if let Some(n) = resolved.config.threads {
        // A second initialization (e.g. in tests) keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    let command = cli.command;
    let outcome = dispatch(command, &resolved)?;
    write_outputs(&resolved.output_dir, command.name(), &resolved, &outcome)?;
    print!("{}", summary_text(command.name(), &resolved, &outcome));
    println!(
        "  report: {}",
        resolved.output_dir.join("report.json").display()
    );
    Ok(if outcome.failed() {
        EXIT_TOLERANCE
    } else {
        EXIT_OK
    })
}
