mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Optimal consumption and investment under a consumption floor `c >= kX + l`.
#[derive(Debug, Parser)]
#[command(name = "cfloor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the problem case and derived constants as JSON.
    Classify { config: PathBuf },
    /// Solve the problem and write summary.json, dual.csv and policy.csv.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Re-run the verification suite on the files of a previous solve.
    Verify {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the discounted utility of a feedback policy by simulation.
    Simulate {
        config: PathBuf,
        /// Initial wealth; falls back to `x0` in the config.
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long, default_value_t = 1.0 / 250.0)]
        dt: f64,
        #[arg(long, default_value_t = 300.0)]
        horizon: f64,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PolicyChoice::Optimal)]
        policy: PolicyChoice,
        /// Also run at dt/2 and add the change to the comparison tolerance.
        #[arg(long)]
        dt_check: bool,
        /// Directory for sim.json and the manifest; stdout only if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Debug, Clone, Copy, clap::Args)]
pub struct GridArgs {
    /// Number of grid nodes.
    #[arg(long, default_value_t = 4096)]
    pub nodes: usize,
    /// Lower end of the dual domain as a multiple of the reference price `c_e^(p-1)`.
    #[arg(long, default_value_t = 1e-4)]
    pub y_lo: f64,
    #[arg(long, default_value_t = 1e4)]
    pub y_hi: f64,
    /// Wealth range of the closed-form table when `l = 0`.
    #[arg(long, default_value_t = 1e-3)]
    pub x_lo: f64,
    #[arg(long, default_value_t = 1e3)]
    pub x_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyChoice {
    Optimal,
    Floor,
    Merton,
}

impl PolicyChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyChoice::Optimal => "optimal",
            PolicyChoice::Floor => "floor",
            PolicyChoice::Merton => "merton",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Classify { config } => commands::classify(&config),
        Command::Solve { config, out, grid } => commands::solve(&config, &out, &grid),
        Command::Verify { config, out } => commands::verify(&config, &out),
        Command::Simulate {
            config,
            x0,
            dt,
            horizon,
            paths,
            seed,
            policy,
            dt_check,
            out,
            grid,
        } => commands::simulate(
            &config,
            &commands::SimArgs {
                x0,
                dt,
                horizon,
                paths,
                seed,
                policy,
                dt_check,
            },
            out.as_deref(),
            &grid,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cfloor: {:#}", f.source);
            ExitCode::from(f.code)
        }
    }
}
