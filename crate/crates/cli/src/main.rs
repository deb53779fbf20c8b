//! `linkdiff`: consensus difficulty labelling, feature extraction,
//! classification and oracle-feedback simulation for entity-linking output.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use linkdiff::consensus::AlignPolicy;
use linkdiff::learn::Variant;
use linkdiff::simulate::Strategy;

mod commands;
mod config;
mod failure;
mod files;

use config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(
    name = "linkdiff",
    version,
    about = "Predict how hard entity-linking mentions are"
)]
struct Cli {
    /// Pipeline configuration (TOML). Paths inside are relative to the file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every randomized stage derives its own seed from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Align the system dumps and label every common mention.
    Label {
        #[arg(long)]
        policy: Option<AlignPolicy>,
    },
    /// Extract the feature table for labelled (or raw) mentions.
    Features(FeaturesArgs),
    /// Train one classifier on the feature table.
    Train(TrainArgs),
    /// Cross-validate classifier variants.
    Eval(EvalArgs),
    /// Predict difficulty labels with a trained model.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Mentions in feature-table row order (default: the labels file).
        #[arg(long)]
        mentions: Option<PathBuf>,
    },
    /// Rank features by mean decrease in impurity.
    Importance {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Pearson correlations between feature columns.
    Correlate {
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Simulate oracle feedback under each selection strategy.
    Simulate(SimulateArgs),
    /// Write a synthetic corpus, system dumps, gold links and a config.
    GenSynthetic {
        #[arg(long, default_value_t = 200)]
        documents: usize,
    },
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Column selection, e.g. `all`, `m_cand` or `m_len,m_cand`.
    #[arg(long)]
    pub schema: Option<String>,
    /// Drop the temporal columns.
    #[arg(long)]
    pub no_temporal: bool,
    /// Mention list (`doc<TAB>offset<TAB>surface`) or labels file.
    #[arg(long)]
    pub mentions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Undersample every class to the minority count.
    #[arg(long)]
    pub balance: bool,
    /// Per-class sample fraction in (0, 1].
    #[arg(long)]
    pub sample: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<Variant>,
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',')]
    pub strategies: Vec<Strategy>,
    /// Comma-separated budgets: `5%`, `0.05` or counts.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Vec<String>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    if let Command::GenSynthetic { documents } = cli.command {
        return commands::gen_synthetic(&cfg, documents);
    }
    cfg.validate()?;
    log::info!("master seed {}", cfg.seed());
    match cli.command {
        Command::Label { policy } => commands::label(&cfg, policy),
        Command::Features(args) => commands::features(&cfg, &args),
        Command::Train(args) => commands::train(&cfg, &args),
        Command::Eval(args) => commands::eval(&cfg, &args),
        Command::Predict {
            model,
            features,
            mentions,
        } => commands::predict(&cfg, model, features, mentions),
        Command::Importance { model } => commands::importance(&cfg, model),
        Command::Correlate { features } => commands::correlate(&cfg, features),
        Command::Simulate(args) => commands::simulate(&cfg, &args),
        Command::GenSynthetic { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = failure::exit_code(&e);
            if code == failure::EXIT_DEGENERATE {
                log::warn!("{e:#}");
            } else {
                log::error!("{e:#}");
            }
            ExitCode::from(code as u8)
        }
    }
}
