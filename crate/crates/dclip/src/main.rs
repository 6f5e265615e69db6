use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dclip::cli;

#[derive(Parser)]
#[command(
    name = "dclip",
    about = "Counterfactual off-policy evaluation: IPS, clipped IPS, double-clipped IPS"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate logged bandit data and write it as JSON-lines
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config file
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the configured estimator on a logged dataset
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Optional JSON output path for the estimate
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep clipping constants over repeated simulations, writing CSV
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config file
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exact bias decomposition on a tabular environment
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(command: Command) -> dclip::Result<()> {
    match command {
        Command::Simulate { config, out, seed } => {
            let summary = cli::cmd_simulate(&config, &out, seed)?;
            println!("wrote {} records (seed {})", summary.n, summary.seed);
        }
        Command::Estimate {
            config,
            dataset,
            out,
        } => {
            let estimate = cli::cmd_estimate(&config, &dataset, out.as_deref())?;
            println!("value = {}", estimate.value);
            println!("n_used = {}", estimate.n_used);
            println!(
                "clipped_above = {}, clipped_below = {}, unclipped = {}",
                estimate.clip_stats.clipped_above,
                estimate.clip_stats.clipped_below,
                estimate.clip_stats.unclipped
            );
        }
        Command::Sweep { config, out, seed } => {
            let summary = cli::cmd_sweep(&config, &out, seed)?;
            println!(
                "true_reward = {} (se {})",
                summary.result.true_reward, summary.result.true_reward_se
            );
            let (u, l, mse) = summary.best_cips;
            println!("min MSE cips:  U = {u}, L = {l}, mse = {mse}");
            let (u, l, mse) = summary.best_dcips;
            println!("min MSE dcips: U = {u}, L = {l}, mse = {mse}");
        }
        Command::Oracle { config } => {
            let summary = cli::cmd_oracle(&config)?;
            println!("exact_expected_estimate = {}", summary.expected_estimate);
            println!("exact_true_reward = {}", summary.true_reward);
            println!("bias_total = {}", summary.bias.bias_total);
            println!("upper_term = {}", summary.bias.upper_term);
            println!("lower_term = {}", summary.bias.lower_term);
            println!("consistency_residual = {}", summary.residual);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
