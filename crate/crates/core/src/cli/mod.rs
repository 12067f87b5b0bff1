//! Command-line front end.
//!
//! Exit codes: 0 when every verdict holds, 1 when an analysis ran and some
//! verdict failed (or a verdict sits on its threshold), 2 for input and
//! usage errors.

mod commands;
pub mod model_file;
pub mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::IohdError;
use crate::linalg::Tolerances;

#[derive(Debug, Parser)]
#[command(
    name = "iohd",
    version,
    about = "Analysis of input-output Hamiltonian systems with dissipation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Relative symmetry tolerance
    #[arg(long, global = true, env = "IOHD_TOL_SYM", default_value_t = 1e-10)]
    pub tol_sym: f64,
    /// Relative PSD tolerance
    #[arg(long, global = true, env = "IOHD_TOL_PSD", default_value_t = 1e-9)]
    pub tol_psd: f64,
    /// Relative equality tolerance
    #[arg(long, global = true, env = "IOHD_TOL_EQ", default_value_t = 1e-9)]
    pub tol_eq: f64,
    /// Seed for randomized certificate scans
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print the JSON report to stdout instead of the text summary
    #[arg(long, global = true)]
    pub json: bool,
    /// Output artifact: composed model, rediagonalized model or trace CSV
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write the JSON report to this path
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a model or search for an IOHD certificate of a state-space realization
    Check {
        model: PathBuf,
        /// Random certificate family members to try after the particular solution
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// Positive feedback interconnection of two models
    Interconnect { first: PathBuf, second: PathBuf },
    /// Network interconnection; models are vertex systems, then edge systems for directed graphs
    Network {
        graph: PathBuf,
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
    /// Decompose an interconnection certificate into component certificates
    Converse {
        model: PathBuf,
        /// Search for a certificate instead of reading P from the file
        #[arg(long)]
        find_certificate: bool,
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// Simulate a catalog model or a linear model file
    Simulate {
        /// Catalog name (mass_spring_2dof, oscillator, duffing) or model file path
        target: String,
        /// Catalog parameters, e.g. `d1=0.5,d2=0.5`
        #[arg(long, default_value = "")]
        params: String,
        /// Initial state, comma separated (default zero)
        #[arg(long)]
        x0: Option<String>,
        /// zero | step:v1,v2,... | sine:a1,f1,a2,f2,... (amplitude and frequency in Hz per channel)
        #[arg(long, default_value = "zero")]
        input: String,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10.0)]
        tend: f64,
        /// Skip the per-evaluation J/R structure checks
        #[arg(long)]
        no_spot_checks: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input: exit 2.
    Input(String),
    /// Analysis could not complete: exit 1.
    Analysis(String),
}

impl From<IohdError> for CliError {
    fn from(e: IohdError) -> Self {
        match e {
            IohdError::Dimension(_)
            | IohdError::NonFinite { .. }
            | IohdError::NotSymmetric { .. }
            | IohdError::Graph(_)
            | IohdError::UnknownCatalog(_)
            | IohdError::InvalidParameter(_) => CliError::Input(e.to_string()),
            _ => CliError::Analysis(e.to_string()),
        }
    }
}

impl GlobalArgs {
    pub fn tolerances(&self) -> Result<Tolerances, CliError> {
        Tolerances::new(self.tol_sym, self.tol_psd, self.tol_eq).map_err(CliError::from)
    }
}

/// Parses the process arguments, runs the command and returns its exit code.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Analysis(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
