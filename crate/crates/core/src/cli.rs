//! Command-line front end: argument definitions and the dispatch that maps
//! results to exit codes.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Experiment, ExperimentConfig, OutputFormat, Overrides};
use crate::error::Result;
use crate::experiment::run;
use crate::model::DriveShape;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nhwork", version, about = "Work statistics of non-Hermitian SSH chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Eigenvalue tracks across a gamma or delta grid
    Spectrum,
    /// Work distributions per parameter point and temperature
    WorkDist,
    /// Mean work, variance and system-energy change over the beta grid
    SweepBeta,
    /// Oracle and limit checks; exits 3 on any failure
    Verify,
}

impl Command {
    pub fn experiment(self) -> Experiment {
        match self {
            Command::Spectrum => Experiment::SpectrumSweep,
            Command::WorkDist => Experiment::WorkDistribution,
            Command::SweepBeta => Experiment::BetaSweep,
            Command::Verify => Experiment::Verify,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DriveArg {
    Slow,
    Sudden,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON experiment config; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub sites: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub ttot: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub drive: Option<DriveArg>,
    #[arg(long, global = true)]
    pub rounds: Option<u32>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Omit the provenance line
    #[arg(long, global = true)]
    pub no_metadata: bool,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        let f = &self.flags;
        Overrides {
            experiment: Some(self.command.experiment()),
            output_path: f.output.clone(),
            output_format: f.format.map(|x| match x {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::Json => OutputFormat::Json,
            }),
            gamma: f.gamma,
            delta: f.delta,
            beta: f.beta,
            sites: f.sites,
            t_total: f.ttot,
            drive: f.drive.map(|d| match d {
                DriveArg::Slow => DriveShape::SlowSine,
                DriveArg::Sudden => DriveShape::Sudden,
            }),
            rounds: f.rounds,
            dt: f.dt,
            no_metadata: f.no_metadata,
        }
    }

    /// Config file (or defaults) with the flags applied, validated.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.flags.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        config.apply(&self.overrides());
        config.validate()?;
        Ok(config)
    }
}

/// Runs the command and returns the process exit status. Errors are
/// reported on stderr.
pub fn execute(cli: &Cli) -> i32 {
    match try_execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn try_execute(cli: &Cli) -> Result<i32> {
    let config = cli.resolve()?;
    let out = run(&config)?;
    let text = match config.output_format {
        OutputFormat::Csv => out.table.to_csv()?,
        OutputFormat::Json => out.table.to_json(),
    };
    match &config.output_path {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    if out.passed {
        Ok(EXIT_OK)
    } else {
        eprintln!("verification failed");
        Ok(EXIT_VERIFY_FAILED)
    }
}

/// Parses arguments without exiting; help and version requests come back
/// as `Err` carrying their rendered text and exit status 0.
pub fn parse<I, T>(args: I) -> std::result::Result<Cli, (String, i32)>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        (e.render().to_string(), code)
    })
}
