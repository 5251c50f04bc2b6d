use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levy_spectral::run::{self, Overrides, RunConfig, OUTPUT_ENV};
use levy_spectral::Error;

/// Spectral estimation of Levy densities from discretely observed increments.
#[derive(Parser)]
#[command(name = "levy-spectral", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate increments and write sample.csv / sample.json.
    Simulate(Args),
    /// Estimate the Levy density and write grids plus diagnostics.json.
    Estimate(Args),
    /// Compare an estimate with the reference model and write metrics.json.
    Evaluate(Args),
    /// Sweep sample sizes and seeds; write convergence.csv / convergence.json.
    Convergence(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the sample size (clears any n sweep).
    #[arg(long)]
    n: Option<usize>,
    /// Override the seed (clears any seed list).
    #[arg(long)]
    seed: Option<u64>,
    /// Use this explicit bandwidth.
    #[arg(long)]
    h: Option<f64>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Capacity(_) => 3,
        e if e.is_config_error() => 2,
        _ => 1,
    }
}

fn execute(cli: Cli) -> levy_spectral::Result<()> {
    let (Command::Simulate(args)
    | Command::Estimate(args)
    | Command::Evaluate(args)
    | Command::Convergence(args)) = &cli.command;
    let mut config = RunConfig::load(&args.config)?;
    config.apply(Overrides {
        n: args.n,
        seed: args.seed,
        h: args.h,
    });
    let dir = config.output_dir(std::env::var_os(OUTPUT_ENV).map(PathBuf::from));
    match cli.command {
        Command::Simulate(_) => {
            for path in run::cmd_simulate(&config, &dir)? {
                println!("{}", path.display());
            }
        }
        Command::Estimate(_) => {
            let d = run::cmd_estimate(&config, &dir)?;
            println!(
                "h = {}, masked fraction = {}, trace estimate = {}, output in {}",
                d.bandwidth,
                d.masked_fraction,
                d.trace_sigma,
                dir.display()
            );
        }
        Command::Evaluate(_) => {
            let m = run::cmd_evaluate(&config, &dir)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Convergence(_) => {
            let r = run::cmd_convergence(&config, &dir)?;
            for s in &r.summary {
                println!(
                    "n = {:>8}  median sup error = {:.6e}  median relative L2 error = {:.6e}",
                    s.n, s.median_sup_error, s.median_relative_l2_error
                );
            }
            if let Some(slope) = r.slope_sup_error {
                println!("log-log slope of sup error: {slope:.4}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
