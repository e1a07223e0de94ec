use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use misoqos_cli::commands::{
    run_balance, run_compare_sinr, run_feasibility, run_gap, run_power_min, BalanceArgs,
    FeasibilityArgs, GapArgs, PowerMinArgs,
};
use misoqos_cli::exit_code;

#[derive(Parser)]
#[command(
    name = "misoqos",
    about = "QoS-constrained transceiver design for the MISO broadcast channel with imperfect transmitter CSI",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize total transmit power under per-user average-rate targets
    PowerMin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ensemble seed (overrides the config's `seed`)
        #[arg(long)]
        seed: Option<u64>,
        /// Convergence threshold override
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Re-evaluate the final filters on an independent ensemble
        #[arg(long)]
        eval_ensemble_seed: Option<u64>,
    },
    /// Maximize the common rate-target scaling under a power budget
    Balance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Power budget in dB (overrides the config's balance section)
        #[arg(long)]
        ptx_db: Option<f64>,
    },
    /// Test whether the configured targets are achievable with finite power
    Feasibility {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Use the solver's converged precoders instead of unit ones
        #[arg(long)]
        tau_from_solver: bool,
    },
    /// Gap between the average rate and its average-MMSE lower bound
    Gap {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Scalar precoder power for the sampling mode
        #[arg(long)]
        p2: Option<f64>,
        /// Noise variance for the sampling mode
        #[arg(long)]
        sigma2: Option<f64>,
        /// Sample count (accepts scientific notation, e.g. 1e6)
        #[arg(long)]
        count: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run power-min and tabulate Monte Carlo rates vs the SINR approximation
    CompareSinr {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::PowerMin {
            config,
            out,
            seed,
            tol,
            max_iters,
            eval_ensemble_seed,
        } => run_power_min(&PowerMinArgs {
            config,
            out,
            seed,
            tol,
            max_iters,
            eval_ensemble_seed,
        }),
        Command::Balance {
            config,
            out,
            seed,
            ptx_db,
        } => run_balance(&BalanceArgs {
            config,
            out,
            seed,
            ptx_db,
        }),
        Command::Feasibility {
            config,
            seed,
            tau_from_solver,
        } => run_feasibility(&FeasibilityArgs {
            config,
            seed,
            tau_from_solver,
        }),
        Command::Gap {
            alpha,
            beta,
            p2,
            sigma2,
            count,
            seed,
        } => run_gap(&GapArgs {
            alpha,
            beta,
            p2,
            sigma2,
            count,
            seed,
        })
        .map(|report| {
            print!("{report}");
            exit_code::OK
        }),
        Command::CompareSinr { config, out, seed } => run_compare_sinr(&PowerMinArgs {
            config,
            out,
            seed,
            tol: None,
            max_iters: None,
            eval_ensemble_seed: None,
        }),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code::USAGE as u8)
        }
    }
}
