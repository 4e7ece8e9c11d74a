use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;

use error::CliError;

/// Train, evaluate and explain mixture-of-linear-models predictors.
///
/// Every command reads a TOML config. Flags override the file.
/// Log verbosity follows the MLM_LOG variable (error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "mlm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the network and the mixture; writes model.json and a run report.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Cross-validate the per-layer cluster count.
    CvK {
        #[command(flatten)]
        common: Common,
        /// Comma-separated candidates; overrides `cv.grid`.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Writes predictions as CSV to standard output.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Overrides `data.predict`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Soft)]
        mode: Mode,
        /// Adds one posterior column per EPIC.
        #[arg(long)]
        posteriors: bool,
    },
    /// Reports train and test accuracy as JSON.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Labelled test file; overrides `data.test`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Writes interpretation reports for one or all EPICs.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        /// EPIC id (0-based) or `all`.
        #[arg(long, default_value = "all")]
        epic: String,
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long)]
        psi: Option<f64>,
        #[arg(long)]
        eta: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Lds,
    Pr,
    Both,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { common } => commands::train(&commands::setup(&common)?),
        Command::CvK {
            common,
            grid,
            folds,
        } => commands::cv_k(&commands::setup(&common)?, grid, folds),
        Command::Predict {
            common,
            model,
            input,
            mode,
            posteriors,
        } => commands::predict(&commands::setup(&common)?, model, input, mode, posteriors),
        Command::Evaluate {
            common,
            model,
            input,
        } => commands::evaluate(&commands::setup(&common)?, model, input),
        Command::Explain {
            common,
            model,
            method,
            epic,
            xi,
            psi,
            eta,
        } => {
            let mut cfg = commands::setup(&common)?;
            if let Some(v) = xi {
                cfg.interpret.xi = v;
            }
            if let Some(v) = psi {
                cfg.interpret.psi = v;
            }
            if let Some(v) = eta {
                cfg.interpret.eta = v;
            }
            cfg.validate()?;
            commands::explain(&cfg, model, method, &epic)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MLM_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
