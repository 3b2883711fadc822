//! Command-line driver: configuration, synthetic data, run manifests and
//! reports around the `distress-core` pipeline.

pub mod commands;
pub mod config;
pub mod exit;
pub mod manifest;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use exit::{CliError, Stage};

#[derive(Debug, Parser)]
#[command(name = "distress", version, about = "Distress detection by transfer learning across post corpora")]
pub struct Cli {
    /// Pipeline config (TOML). `DT_` environment variables override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages. Defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate labeled source posts, target posts and a target label sample.
    Synth {
        /// Generator settings (TOML); defaults apply to missing keys.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Ingest and filter both corpora and report counts.
    Ingest,
    /// Build the common feature matrices.
    Features,
    /// Run domain adaptation and write KS diagnostics.
    Adapt,
    /// Grid-search, train and evaluate the three classifiers.
    Train,
    /// Full pipeline: adapt, train, select, predict, index, manifest.
    Run,
    /// Compute the daily index from a predictions CSV.
    Index {
        /// `user_id,date,label` CSV; defaults to `<out-dir>/predictions.csv`.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// `date,label` CSV of events to mark on the plot.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Compare run manifests as one metrics table.
    Report {
        manifests: Vec<PathBuf>,
    },
}

/// Runs one parsed command. `env` supplies the `DT_` overrides.
pub fn execute(cli: &Cli, env: Vec<(String, String)>) -> Result<(), CliError> {
    let ctx = commands::Context {
        config_path: cli.config.clone(),
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
        env,
    };
    match &cli.command {
        Command::Synth { spec } => commands::synth(&ctx, spec.as_deref()),
        Command::Ingest => commands::ingest(&ctx),
        Command::Features => commands::features(&ctx),
        Command::Adapt => commands::adapt(&ctx),
        Command::Train => commands::train(&ctx).map(|_| ()),
        Command::Run => commands::run(&ctx).map(|_| ()),
        Command::Index { predictions, annotations } => {
            commands::index(&ctx, predictions.as_deref(), annotations.as_deref())
        }
        Command::Report { manifests } => commands::report(&ctx, manifests),
    }
}

/// Caps the global rayon pool. Only the first call in a process has effect.
pub fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::new(Stage::Usage, "--threads must be at least 1"));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialised; --threads ignored");
        }
    }
    Ok(())
}
