use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "satflow", version, about = "Analyse and simulate flow networks under saturated PI control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Report,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Network spec file (JSON)
    #[arg(long)]
    pub spec: PathBuf,
    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Draw a random initial state from this seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 200.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Static convergence verdict for the network
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Integrate the closed loop and write the trajectory
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Spacing of CSV rows in time units
        #[arg(long, default_value_t = 0.1)]
        sample_interval: f64,
    },
    /// Minimal cycle cover and multiplicity vector
    Cover {
        #[command(flatten)]
        common: Common,
        /// Also build the augmented network
        #[arg(long)]
        augment: bool,
        /// Breakpoints per edge as JSON, e.g. `[[],[],[0.8],[],[]]`;
        /// evenly spaced when omitted
        #[arg(long, requires = "augment")]
        breakpoints: Option<String>,
    },
    /// Absorb the in/outflow and reorient edges to compatible intervals
    Normalize {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze { common } => commands::analyze(&common),
        Command::Simulate { common, sample_interval } => commands::simulate(&common, sample_interval),
        Command::Cover { common, augment, breakpoints } => commands::cover(&common, augment, breakpoints.as_deref()),
        Command::Normalize { common } => commands::normalize(&common),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
