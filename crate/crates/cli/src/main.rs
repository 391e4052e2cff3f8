//! `euler-ldp`: config-driven simulations, action computations and
//! verification suites.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<euler_ldp::Error> for CliError {
    fn from(e: euler_ldp::Error) -> Self {
        use euler_ldp::Error as E;
        match e {
            E::NonFinite(_)
            | E::Dimension { .. }
            | E::InvalidParameter(_)
            | E::TimeOutOfRange(_)
            | E::NotRare { .. }
            | E::TiltUnsupported
            | E::NoClosedForm(_) => CliError::Config(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "euler-ldp", version, about = "Large deviations of stochastic Euler schemes")]
#[command(after_help = "Exit codes: 0 success, 1 assertion failure, 2 config error, 3 numerical failure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment config
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Worker cap for sampling; overrides the config
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate scheme trajectories
    #[command(after_help = commands::HELP_SIMULATE)]
    Simulate(Common),
    /// Evaluate the rate functional on a path
    #[command(after_help = commands::HELP_ACTION)]
    Action(Common),
    /// Minimize the rate functional under a terminal constraint
    #[command(after_help = commands::HELP_MINIMIZE)]
    Minimize(Common),
    /// Check the exponential martingale identity by Monte Carlo
    #[command(name = "verify-martingale", after_help = commands::HELP_MARTINGALE)]
    VerifyMartingale(Common),
    /// Compare empirical decay rates with the minimum action
    #[command(name = "verify-rate", after_help = commands::HELP_RATE)]
    VerifyRate(Common),
    /// Estimate the exponential convergence to the limit ODE
    #[command(name = "verify-ode", after_help = commands::HELP_ODE)]
    VerifyOde(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => commands::simulate(c),
        Command::Action(c) => commands::action(c),
        Command::Minimize(c) => commands::minimize(c),
        Command::VerifyMartingale(c) => commands::verify_martingale(c),
        Command::VerifyRate(c) => commands::verify_rate(c),
        Command::VerifyOde(c) => commands::verify_ode(c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
