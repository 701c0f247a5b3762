use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use klmdp_cli::{cmd_plot, cmd_solve, cmd_track, CliError, ExperimentConfig, SolveOptions};

#[derive(Parser)]
#[command(name = "klmdp", version, about = "KL-cost average-cost MDPs and online tracking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the multiplicative Poisson equation for a passive kernel and a cost.
    Solve {
        /// Passive kernel, one CSV row per state.
        passive: PathBuf,
        /// State costs, one line or one value per line.
        cost: PathBuf,
        /// Write the relative value function h here.
        #[arg(long)]
        h_out: Option<PathBuf>,
        /// Write the optimal (twisted) kernel here.
        #[arg(long)]
        kernel_out: Option<PathBuf>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Run the Monte-Carlo target-tracking experiment.
    Track {
        /// JSON config; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides base_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: logical cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Render a summary CSV as an SVG regret plot.
    Plot { summary: PathBuf, out: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve {
            passive,
            cost,
            h_out,
            kernel_out,
            tolerance,
            max_iterations,
        } => {
            let report = cmd_solve(&SolveOptions {
                passive,
                cost,
                h_out,
                kernel_out,
                tolerance,
                max_iterations,
            })?;
            println!("{report}");
        }
        Command::Track {
            config,
            seed,
            workers,
            output_dir,
        } => {
            let mut cfg = ExperimentConfig::load(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.base_seed = seed;
            }
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let report = cmd_track(&cfg, workers)?;
            let last = report.hindsight.mean.len() - 1;
            println!(
                "{} runs, T = {}: mean regret vs hindsight {:.4} (sd {:.4})",
                report.hindsight.runs,
                last + 1,
                report.hindsight.mean[last],
                report.hindsight.stddev[last]
            );
            if let Some(pool) = &report.pool {
                println!("mean regret vs pool best {:.4} (sd {:.4})", pool.mean[last], pool.stddev[last]);
            }
            println!("wrote {}", report.summary_file.display());
        }
        Command::Plot { summary, out } => {
            cmd_plot(&summary, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
