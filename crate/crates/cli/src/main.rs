//! `seqinfo`: reproduce the worked example, run certificates and audits,
//! and solve target-choice problems from JSON scenarios.
//!
//! Exit status is 0 when every check passes, 1 when a certificate or audit
//! fails (or the target iteration does not converge), and 2 on bad input or
//! unwritable output.

mod commands;
mod error;
mod output;
mod plot;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::output::Verdict;

#[derive(Debug, Parser)]
#[command(
    name = "seqinfo",
    version,
    about = "Sequential learning toward a target information structure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every subcommand. Numeric flags override the matching
/// scenario fields.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario JSON; the worked binary example when omitted.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo path count.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Monte Carlo time step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Monte Carlo horizon.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Grid size: time points (example1, sosd), information points
    /// (dp-verify) or simplex resolution (target).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Values, decision-time laws and figure data of the worked example.
    Example1,
    /// Certify the stationary policy on the relaxed program.
    DpVerify {
        /// Number of periods; overrides `grids.periods`.
        #[arg(long)]
        periods: Option<usize>,
    },
    /// Optimal target lottery by concavification.
    Target,
    /// Monte Carlo audits of a learning strategy.
    Mc {
        /// Also compare mean decision times across step sizes with the
        /// bridge correction off and on.
        #[arg(long)]
        bridge_study: bool,
    },
    /// Second-order stochastic dominance between decision-time laws.
    Sosd {
        /// `t,cdf` CSV of the first law.
        #[arg(long, requires = "second")]
        first: Option<PathBuf>,
        /// `t,cdf` CSV of the second law, tested as the riskier one.
        #[arg(long, requires = "first")]
        second: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Verdict, CliError> {
    let common = &cli.common;
    match cli.command {
        Command::Example1 => commands::example1::run(common),
        Command::DpVerify { periods } => commands::dp_verify::run(common, periods),
        Command::Target => commands::target::run(common),
        Command::Mc { bridge_study } => commands::mc::run(common, bridge_study),
        Command::Sosd { first, second } => commands::sosd::run(common, first.zip(second)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.common.out.clone();
    match run(cli) {
        Ok(verdict) => {
            println!("{}: results in {}", verdict.label(), out.display());
            ExitCode::from(verdict.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
