use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pshape::cli::{self, ConfigCommand};

/// Shape optimization toolkit for p-Laplacian state problems on a fixed
/// design region.
#[derive(Parser)]
#[command(name = "pshape", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the relaxed state problem described by a config file
    SolveState {
        /// Path to a `key = value` run config
        #[arg(long)]
        config: PathBuf,
    },
    /// Minimize the penalized energy with a free support boundary
    OptimizeFb {
        #[arg(long)]
        config: PathBuf,
    },
    /// Optimize a node density under a volume budget (projected gradient)
    OptimizeControl {
        #[arg(long)]
        config: PathBuf,
    },
    /// Metric distance between two measure-field CSVs through their
    /// unit-load states
    GammaDistance {
        /// First measure field (node CSV; `inf` marks hard Dirichlet nodes)
        #[arg(long)]
        mu: PathBuf,
        /// Second measure field
        #[arg(long)]
        nu: PathBuf,
        /// Exponent of the state problem and of the comparison norm
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Output directory for report.json and manifest.json
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Level-band diagnostic (band measure, gradient integral, perimeter)
    /// of the field solved from a config
    PerimeterDiag {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare equal-area shapes in the unit disc under the supremal cost
    InfLens {
        /// Volume budget in (0, pi)
        #[arg(long)]
        m: f64,
        /// Grid resolution per axis
        #[arg(long, default_value_t = 257)]
        n: usize,
        /// Output directory for omega.csv, report.json, manifest.json
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Report which solvability conditions the configured data satisfies
    CheckHypotheses {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cmd: Cmd) -> pshape::error::Result<cli::RunOutcome> {
    match cmd {
        Cmd::SolveState { config } => {
            cli::run_config_command(ConfigCommand::SolveState, &cli::load_config(&config)?)
        }
        Cmd::OptimizeFb { config } => {
            cli::run_config_command(ConfigCommand::OptimizeFb, &cli::load_config(&config)?)
        }
        Cmd::OptimizeControl { config } => {
            cli::run_config_command(ConfigCommand::OptimizeControl, &cli::load_config(&config)?)
        }
        Cmd::GammaDistance { mu, nu, p, out } => cli::run_gamma_distance(&mu, &nu, p, &out),
        Cmd::PerimeterDiag { config } => {
            cli::run_config_command(ConfigCommand::PerimeterDiag, &cli::load_config(&config)?)
        }
        Cmd::InfLens { m, n, out } => cli::run_inf_lens(m, n, &out),
        Cmd::CheckHypotheses { config } => {
            cli::run_config_command(ConfigCommand::CheckHypotheses, &cli::load_config(&config)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(outcome) => {
            if let Some(text) = &outcome.stdout {
                print!("{}", text);
            }
            ExitCode::from(outcome.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}
