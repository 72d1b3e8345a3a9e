mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "optcmd", version, about = "Optimistic composite mirror descent: experiments and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config, or a run manifest (.json) to replay.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, value_name = "DIR", default_value = "results")]
    out: PathBuf,
    /// Master seed of the command's section.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override a config key; bare keys refer to the command's section.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Also write tidy long-format curves for plotting.
    #[arg(long)]
    emit_plot_data: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parameter tracking with linear dynamics.
    Track(Common),
    /// Online portfolio selection on a dataset or a synthetic market.
    Portfolio {
        #[command(flatten)]
        common: Common,
        /// Price-relative CSV with a header row.
        #[arg(long, value_name = "PATH", conflicts_with = "synthetic")]
        dataset: Option<PathBuf>,
        /// Generate a market with N assets and T rounds.
        #[arg(long, num_args = 3, value_names = ["N", "T", "SEED"])]
        synthetic: Option<Vec<u64>>,
    },
    /// Run the property and bound suites; exits 1 if any fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated substrings of suite names.
        selection: Option<String>,
    },
    /// Time single steps of every algorithm.
    Bench(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Track(c) => {
            let mut cfg = config::load(c.config.as_deref(), &c.set, "track")?;
            if let Some(s) = c.seed {
                cfg.track.seed = s;
            }
            commands::track(&cfg, &c.out, c.emit_plot_data)
        }
        Command::Portfolio {
            common: c,
            dataset,
            synthetic,
        } => {
            let mut cfg = config::load(c.config.as_deref(), &c.set, "portfolio")?;
            if let Some(s) = c.seed {
                cfg.portfolio.seed = s;
            }
            if let Some(p) = dataset {
                cfg.portfolio.dataset = p.to_string_lossy().into_owned();
            }
            if let Some(v) = synthetic {
                cfg.market.assets = v[0] as usize;
                cfg.market.horizon = v[1] as usize;
                cfg.market.seed = v[2];
                cfg.portfolio.dataset.clear();
            }
            commands::portfolio(&mut cfg, &c.out, c.emit_plot_data)
        }
        Command::Verify { common: c, selection } => {
            let mut cfg = config::load(c.config.as_deref(), &c.set, "verify")?;
            if let Some(s) = c.seed {
                cfg.verify.seed = s;
            }
            if let Some(s) = selection {
                cfg.verify.suites = s;
            }
            commands::verify(&cfg, &c.out)
        }
        Command::Bench(c) => {
            let mut cfg = config::load(c.config.as_deref(), &c.set, "bench")?;
            if let Some(s) = c.seed {
                cfg.bench.seed = s;
            }
            commands::bench(&cfg, &c.out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("optcmd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
