//! `binspp`: mix corpora, train bin-wise SPP models, evaluate and compare
//! estimators.
//!
//! Exit codes: 0 success, 1 I/O, 2 validation, 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] binspp::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => e.exit_code() as u8,
            CliError::Io(_) | CliError::Csv(_) => 1,
            CliError::Invalid(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "binspp",
    version,
    about = "Bin-wise speech presence probability estimation"
)]
struct Cli {
    /// Run configuration (JSON with optional model, target, baseline and mix sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    /// Blind baseline with SPP-driven noise tracking.
    Unbiased,
    /// Posterior SPP from the true noise component (needs the mixture).
    Oracle,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Binwise,
    Typical,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic tone-burst corpus (clean/ and noise/ WAVs).
    Synth {
        #[arg(long, default_value_t = 20)]
        utterances: usize,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
    },
    /// Pair clean and noise files, mix them at random SNRs and write a manifest.
    Mix {
        #[arg(long)]
        clean_dir: PathBuf,
        #[arg(long)]
        noise_dir: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
    },
    /// Train a model bundle on a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        neighbors: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score an estimator against clean-speech labels.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(
            long,
            conflicts_with = "estimator",
            required_unless_present = "estimator"
        )]
        bundle: Option<PathBuf>,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        /// Estimator label used in the report and file names.
        #[arg(long)]
        name: Option<String>,
        /// Dataset label; defaults to the manifest file stem.
        #[arg(long)]
        dataset: Option<String>,
        /// Also write per-utterance SPP and label matrices.
        #[arg(long)]
        dump: bool,
    },
    /// Write the K×L SPP matrix of one WAV file as CSV.
    Infer {
        #[arg(long)]
        wav: PathBuf,
        #[arg(
            long,
            conflicts_with = "estimator",
            required_unless_present = "estimator"
        )]
        bundle: Option<PathBuf>,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Merge report JSON files into one table and a gnuplot ROC script.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::RunConfig::load(cli.config.as_deref(), cli.seed)?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Synth {
            utterances,
            seconds,
        } => commands::synth(&cfg, out, utterances, seconds),
        Command::Mix {
            clean_dir,
            noise_dir,
            split,
        } => commands::mix(&cfg, out, &clean_dir, &noise_dir, split),
        Command::Train {
            manifest,
            kind,
            neighbors,
            epochs,
        } => commands::train(cfg, out, &manifest, kind, neighbors, epochs),
        Command::Eval {
            manifest,
            bundle,
            estimator,
            name,
            dataset,
            dump,
        } => {
            let est = commands::Estimator::resolve(bundle.as_deref(), estimator)?;
            commands::eval(&cfg, out, &manifest, &est, name, dataset, dump)
        }
        Command::Infer {
            wav,
            bundle,
            estimator,
            output,
        } => {
            let est = commands::Estimator::resolve(bundle.as_deref(), estimator)?;
            commands::infer(&cfg, out, &wav, &est, output)
        }
        Command::Report { reports } => commands::report(out, &reports),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
