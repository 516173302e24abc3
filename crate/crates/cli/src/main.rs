//! `bsreg`: fit, test and simulate Birnbaum-Saunders log-linear regressions.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numerical (non-convergence,
//! rank deficiency, too many failed replications).

mod commands;
mod data;
mod error;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::CsvSchema;

#[derive(Debug, Parser)]
#[command(name = "bsreg", version, about = "Likelihood inference for Birnbaum-Saunders log-linear regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Maximum likelihood fit, optionally under a restriction.
    Fit(FitArgs),
    /// Likelihood ratio, Wald, score and gradient tests.
    Test(TestArgs),
    /// Local power under Pitman alternatives.
    Power(PowerArgs),
    /// Monte Carlo size, critical-value and power studies.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    schema: CsvSchema,

    /// Hold these design columns fixed (use with --values).
    #[arg(long, value_delimiter = ',', alias = "test-cols", requires = "values", conflicts_with = "alpha0")]
    fix_cols: Option<Vec<String>>,

    /// Values for the fixed columns.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "fix_cols")]
    values: Option<Vec<f64>>,

    /// Hold the shape parameter fixed.
    #[arg(long)]
    alpha0: Option<f64>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    output: Format,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    schema: CsvSchema,

    /// Design columns whose coefficients are tested.
    #[arg(long, value_delimiter = ',', requires = "values", required_unless_present = "alpha0", conflicts_with = "alpha0")]
    test_cols: Option<Vec<String>>,

    /// Null values for the tested coefficients.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "test_cols")]
    values: Option<Vec<f64>>,

    /// Null value of the shape parameter.
    #[arg(long)]
    alpha0: Option<f64>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    output: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Beta,
    Alpha,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long, value_enum)]
    family: Family,

    /// Departure from the null: one value for the shape, one per tested
    /// coefficient for the regression family.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    epsilon: Vec<f64>,

    /// Null shape (shape family) or true shape (regression family).
    #[arg(long)]
    alpha0: f64,

    #[arg(long, default_value_t = 0.05)]
    level: f64,

    /// Sample size; with --design-csv it is taken from the file.
    #[arg(long)]
    n: Option<usize>,

    /// Number of regression coefficients, intercept included.
    #[arg(long)]
    p: Option<usize>,

    /// Design for the regression family: the listed covariate columns of this file
    /// (plus --intercept); the trailing `epsilon.len()` columns are tested.
    #[arg(long)]
    design_csv: Option<PathBuf>,

    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,

    #[arg(long)]
    intercept: bool,

    /// Seed of the U(0,1) design used when no file is given.
    #[arg(long, default_value_t = 0)]
    covariate_seed: u64,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    output: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Size,
    Power,
    CriticalValues,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    mode: Mode,

    /// Hypothesis family: trailing coefficients (beta) or the shape (alpha).
    #[arg(long, value_enum, default_value_t = Family::Beta)]
    family: Family,

    #[arg(long)]
    n: usize,

    /// Regression coefficients, intercept included.
    #[arg(long)]
    p: usize,

    /// Number of trailing coefficients tested (beta family).
    #[arg(long, default_value_t = 2)]
    q: usize,

    /// True shape; the null value for the shape family.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,

    /// Nominal levels (default 0.10,0.05,0.01; 0.05 for power).
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,

    #[arg(long, default_value_t = 15_000, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,

    /// Null replications for critical values.
    #[arg(long, default_value_t = 500_000, value_parser = clap::value_parser!(u64).range(1..))]
    critical_reps: u64,

    /// Master seed of the error streams.
    #[arg(long)]
    seed: u64,

    /// Seed of the frozen design (defaults to --seed).
    #[arg(long)]
    covariate_seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,

    /// Departures for power mode.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
          default_value = "-2,-1.5,-1,-0.5,0,0.5,1,1.5,2")]
    deltas: Vec<f64>,

    /// JSON written by `--mode critical-values`; estimated on the fly if absent.
    #[arg(long)]
    critical_values: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    output: Format,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Test(a) => commands::test(&a),
        Command::Power(a) => commands::power(&a),
        Command::Simulate(a) => commands::simulate(&a),
    };
    match result {
        Ok(code) => std::process::exit(code),
        // downstream closed the pipe (`| head`); nothing left to report
        Err(error::CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
