//! `patreid`: runs the experiment pipeline one stage at a time, or all of it.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use patreid::config::ExperimentConfig;
use patreid::pipeline::{run, run_all, Command, RunDirectory, Selection};
use patreid::{Error, ErrorCategory, Result};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  configuration error (also bad command-line usage)
  3  data error
  4  training error
  5  missing prerequisite (run the named command first)
  6  file or checkpoint error";

#[derive(Parser)]
#[command(name = "patreid", version, about = "Inpainting pre-training and individual identification pipeline", after_help = EXIT_CODES)]
struct Cli {
    /// TOML experiment configuration. Without it the run directory's
    /// snapshot is used if present, otherwise the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for data generation, splits, initialisation and shuffling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Architectures to process (comma separated or repeated).
    #[arg(long, global = true, value_delimiter = ',')]
    arch: Vec<String>,
    /// Fine-tuning modes to process: shallow, deep.
    #[arg(long, global = true, value_delimiter = ',')]
    mode: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Generate or import the datasets and write manifests.
    PrepareData,
    /// Pre-train the inpainting generators.
    TrainInpaint,
    /// Fine-tune classifiers on the isolated encoders.
    TrainClassifier,
    /// Region ablation table.
    Ablate,
    /// Clustering metrics and projections of frozen and refined embeddings.
    ClusterEval,
    /// Grad-CAM overlays of the kept classifiers.
    Gradcam,
    /// Collate curves, tables and image grids.
    Report,
    /// Every stage in order.
    All,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

impl Cmd {
    fn stage(self) -> Option<Command> {
        Some(match self {
            Cmd::PrepareData => Command::PrepareData,
            Cmd::TrainInpaint => Command::TrainInpaint,
            Cmd::TrainClassifier => Command::TrainClassifier,
            Cmd::Ablate => Command::Ablate,
            Cmd::ClusterEval => Command::ClusterEval,
            Cmd::Gradcam => Command::Gradcam,
            Cmd::Report => Command::Report,
            Cmd::All | Cmd::ShowConfig => return None,
        })
    }
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Training => 4,
        ErrorCategory::Prerequisite => 5,
        ErrorCategory::Io => 6,
    }
}

/// Explicit file, else the run directory's snapshot, else defaults; then
/// command-line overrides.
fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let out = cli.out.clone().unwrap_or_else(|| ExperimentConfig::default().out);
            let snapshot = RunDirectory::new(out).config_path();
            if snapshot.is_file() {
                log::info!("using configuration snapshot {}", snapshot.display());
                ExperimentConfig::load(&snapshot)?
            } else {
                ExperimentConfig::default()
            }
        }
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if !cli.arch.is_empty() {
        cfg.archs = cli.arch.iter().map(|a| a.parse()).collect::<Result<_>>()?;
    }
    if !cli.mode.is_empty() {
        cfg.modes = cli.mode.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    match cli.command.stage() {
        Some(stage) => run(stage, &cfg, &Selection::from_config(&cfg)),
        None if matches!(cli.command, Cmd::All) => run_all(&cfg),
        None => {
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::MissingPrerequisite { command, .. } = &e {
                eprintln!("hint: `patreid {command}` produces it");
            }
            ExitCode::from(exit_code(e.category()))
        }
    }
}
