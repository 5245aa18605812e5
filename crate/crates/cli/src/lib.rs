//! Command-line entry point for the interaction predictor: featurize,
//! split, train, evaluate, predict.

pub mod cache;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration: exit code 2.
    Config(String),
    /// Unreadable or inconsistent input data: exit code 3.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) => m,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "aaip", about = "Antibody-antigen interaction prediction toolkit")]
struct Cli {
    /// JSON configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flag mirrors for the config keys. Every set flag wins over the file.
#[derive(Debug, Args)]
struct Overrides {
    #[arg(long, global = true)]
    task: Option<String>,
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[arg(long = "out", global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[arg(long, global = true)]
    patience: Option<usize>,
    #[arg(long, global = true)]
    cutoff: Option<f64>,
    #[arg(long, global = true)]
    knn_k: Option<usize>,
    #[arg(long, global = true)]
    s: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    lambda1: Option<f64>,
    #[arg(long, global = true)]
    lambda2: Option<f64>,
    #[arg(long, global = true)]
    hidden: Option<usize>,
    #[arg(long, global = true)]
    layers: Option<usize>,
    #[arg(long, global = true)]
    embed_dim: Option<usize>,
    #[arg(long, global = true)]
    dropout: Option<f64>,
    #[arg(long, global = true)]
    num_radial: Option<usize>,
    #[arg(long, global = true)]
    num_spherical: Option<usize>,
    #[arg(long, global = true)]
    envelope_exponent: Option<usize>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true)]
    sequence_only: bool,
    #[arg(long, global = true)]
    no_structure: bool,
    #[arg(long, global = true)]
    no_plm: bool,
    #[arg(long, global = true)]
    no_smlp: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            };
        }
        take!(task);
        take!(seed);
        take!(jobs);
        take!(lr);
        take!(epochs);
        take!(batch);
        take!(patience);
        take!(cutoff);
        take!(knn_k);
        take!(s);
        take!(lambda);
        take!(lambda1);
        take!(lambda2);
        take!(hidden);
        take!(layers);
        take!(embed_dim);
        take!(dropout);
        take!(num_radial);
        take!(num_spherical);
        take!(envelope_exponent);
        take!(folds);
        if let Some(v) = &self.manifest {
            cfg.manifest = Some(v.clone());
        }
        if let Some(v) = &self.embeddings {
            cfg.embeddings = Some(v.clone());
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if self.sequence_only {
            cfg.sequence_only = true;
        }
        if self.no_structure {
            cfg.no_structure = true;
        }
        if self.no_plm {
            cfg.no_plm = true;
        }
        if self.no_smlp {
            cfg.no_smlp = true;
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse structures and cache structural graphs.
    Featurize,
    /// Write the deterministic k-fold assignment.
    Split,
    /// Run k-fold training with per-fold checkpoints and metrics.
    Train,
    /// Recompute metrics for a checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Splits CSV written by `split`/`train`; requires --fold.
        #[arg(long)]
        splits: Option<PathBuf>,
        /// Fold whose test records to evaluate; requires --splits.
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Write predictions for every manifest record.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate().map_err(CliError::Config)?;
    match &cli.command {
        Command::Featurize => commands::cmd_featurize(&cfg),
        Command::Split => commands::cmd_split(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Evaluate { checkpoint, splits, fold } => {
            commands::cmd_evaluate(&cfg, checkpoint, splits.as_deref(), *fold)
        }
        Command::Predict { checkpoint } => commands::cmd_predict(&cfg, checkpoint),
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
