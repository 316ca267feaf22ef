//! Command-line driver for survey small-area estimation.
//!
//! Exit codes: 0 success, 2 configuration problems, 3 data or io problems,
//! 4 numerical failures. Errors print one JSON line on stderr.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "tulm", version, about = "Small-area estimation from survey panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for the deterministic random stream; equal seeds give
    /// byte-identical outputs.
    #[arg(long)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    output: PathBuf,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a longitudinal unit-level model to survey microdata.
    Fit {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Poststratify posterior draws into domain estimates.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Design-based direct domain estimates with variance.
    Direct {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated-sampling comparison of estimators on a synthetic population.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check the sampler kernels against independent grid densities.
    ValidateKernels {
        #[command(flatten)]
        common: Common,
    },
}

fn dispatch(cli: Cli) -> tulm::Result<()> {
    let common = match &cli.command {
        Command::Fit { common, .. }
        | Command::Predict { common, .. }
        | Command::Direct { common, .. }
        | Command::Study { common, .. }
        | Command::ValidateKernels { common } => common,
    };
    if let Some(n) = common.threads {
        tulm::parallel::configure_threads(n)?;
    }
    match &cli.command {
        Command::Fit { config, common } => run::fit(config, common.seed, &common.output),
        Command::Predict { config, common } => run::predict(config, common.seed, &common.output),
        Command::Direct { config, common } => run::direct(config, common.seed, &common.output),
        Command::Study { config, common } => run::study(config, common.seed, &common.output),
        Command::ValidateKernels { common } => {
            run::validate_kernels(common.seed, &common.output)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let doc = serde_json::json!({
                "error": e.category(),
                "message": e.to_string(),
            });
            eprintln!("{doc}");
            match e.category() {
                "config" => ExitCode::from(2),
                "data" | "io" => ExitCode::from(3),
                _ => ExitCode::from(4),
            }
        }
    }
}
