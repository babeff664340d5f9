use std::path::PathBuf;
use std::process::ExitCode;

use cfrelay_cli::region::{Mode, RegionArgs};
use cfrelay_cli::simulate::{Budgets, SimulateArgs};
use cfrelay_cli::sweep::{Grid, SweepArgs};
use cfrelay_cli::{optimize::OptimizeArgs, CliError};
use cfrelay_core::sim::{DEFAULT_EPSILON, DEFAULT_MAX_SYMBOLS};
use cfrelay_core::JointReading;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "cfrelay",
    version,
    about = "Rate regions, optimization and simulation for a two-relay compress-and-forward network with receiver feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reading {
    Printed,
    Symmetric,
}

impl From<Reading> for JointReading {
    fn from(r: Reading) -> Self {
        match r {
            Reading::Printed => JointReading::Printed,
            Reading::Symmetric => JointReading::Symmetric,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a spec file; exit 0 iff it is well formed.
    Validate { spec: PathBuf },
    /// Evaluate the rate region for the network spec's distribution.
    Region {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "individual")]
        mode: Mode,
        /// Cross-check the closed form against Fourier-Motzkin projection.
        #[arg(long)]
        fme_check: bool,
        /// How to read the joint-decoding rows.
        #[arg(long, value_enum, default_value = "printed")]
        reading: Reading,
        /// Grid points per axis for the containment check of `--mode both`.
        #[arg(long, default_value_t = cfrelay_core::region::DEFAULT_GRID)]
        grid: usize,
        /// JSON report file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search input distributions for the largest achievable rate.
    Optimize {
        spec: PathBuf,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Local-search iterations per restart.
        #[arg(long, default_value_t = 1500)]
        iters: usize,
        #[arg(long, env = "CFRELAY_SEED", default_value_t = 0)]
        seed: u64,
        /// Write the network spec with the best distribution here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the block error rate of the coding scheme by simulation.
    Simulate {
        spec: PathBuf,
        /// Block lengths, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Blocks per trial; carries blocks - 1 messages over blocks + 1 transmissions.
        #[arg(long, default_value_t = 3)]
        blocks: usize,
        /// Nine values k_r,k_s1,k_s2,k_011,k_012,k_021,k_022,kh1,kh2 or name=value pairs.
        #[arg(long, default_value = "k_r=0")]
        bits: String,
        /// Typicality tolerance in (0, 1).
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, env = "CFRELAY_SEED", default_value_t = 0)]
        seed: u64,
        /// Decode the two compression indices jointly at the sender and receiver.
        #[arg(long)]
        joint_decoding: bool,
        /// Cap on stored codeword symbols.
        #[arg(long, default_value_t = DEFAULT_MAX_SYMBOLS)]
        max_symbols: u64,
        /// CSV file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate against a channel parameter (y0_noise, y1_noise, y2_noise, relay_skew).
    Sweep {
        spec: PathBuf,
        /// `name=start:stop:count` or `name=v1,v2,...`.
        #[arg(long)]
        param: String,
        /// Re-optimize at each point instead of re-evaluating the network spec's distribution.
        #[arg(long)]
        optimize: bool,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Local-search iterations per restart.
        #[arg(long, default_value_t = 1500)]
        iters: usize,
        #[arg(long, env = "CFRELAY_SEED", default_value_t = 0)]
        seed: u64,
        /// CSV file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Validate { spec } => cfrelay_cli::validate(&spec),
        Command::Region {
            spec,
            mode,
            fme_check,
            reading,
            grid,
            out,
        } => cfrelay_cli::region::run(&RegionArgs {
            spec,
            mode,
            reading: reading.into(),
            fme_check,
            grid,
            out,
        }),
        Command::Optimize {
            spec,
            restarts,
            iters,
            seed,
            out,
        } => cfrelay_cli::optimize::run(&OptimizeArgs {
            spec,
            restarts,
            iterations: iters,
            seed,
            out,
        }),
        Command::Simulate {
            spec,
            n,
            blocks,
            bits,
            eps,
            trials,
            seed,
            joint_decoding,
            max_symbols,
            out,
        } => cfrelay_cli::simulate::run(&SimulateArgs {
            bits: Budgets::parse(&bits)?,
            blocks,
            epsilon: eps,
            trials,
            seed,
            joint_decoding,
            max_symbols,
            out,
            ..SimulateArgs::new(spec, n)
        }),
        Command::Sweep {
            spec,
            param,
            optimize,
            restarts,
            iters,
            seed,
            out,
        } => cfrelay_cli::sweep::run(&SweepArgs {
            spec,
            grid: Grid::parse(&param)?,
            optimize,
            restarts,
            iterations: iters,
            seed,
            out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
