//! Run-directory orchestration: each command reads the artifacts of earlier
//! commands from the run directory and writes its own plus a completion
//! marker.
//!
//! ```text
//! <out>/config.toml
//! <out>/data/{classification,inpainting,regions}.csv, images/, masks/, regions/
//! <out>/inpaint/<arch>/{best,last}.safetensors, log.csv
//! <out>/classifier/<arch>/<mode>/{model.safetensors, metrics.csv, summary.json}
//! <out>/embeddings/<arch>/{frozen,refined}.csv
//! <out>/clustering/clustering.csv, <encoder>_<method>.png
//! <out>/gradcam/<arch>/<mode>/e<epoch>_id<class>.png
//! <out>/ablation/ablation.{csv,txt}
//! <out>/report/
//! ```

mod plot;
mod prepare;
mod report;
mod stages;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::classifier::TrainMode;
use crate::config::ExperimentConfig;
use crate::inpaint::Arch;
use crate::{Error, Result};

pub use plot::{line_plot, scatter_plot, Series, PALETTE};
pub use prepare::{load_ablation_data, load_classification, load_inpainting, RegionRecord};
pub use report::cmd_report;
pub use stages::{cmd_ablate, cmd_cluster_eval, cmd_gradcam, cmd_train_classifier, cmd_train_inpaint, ClassifierSummary};

pub use prepare::cmd_prepare_data;

const MARKER: &str = ".complete";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    PrepareData,
    TrainInpaint,
    TrainClassifier,
    Ablate,
    ClusterEval,
    Gradcam,
    Report,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::PrepareData,
        Command::TrainInpaint,
        Command::TrainClassifier,
        Command::Ablate,
        Command::ClusterEval,
        Command::Gradcam,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::PrepareData => "prepare-data",
            Command::TrainInpaint => "train-inpaint",
            Command::TrainClassifier => "train-classifier",
            Command::Ablate => "ablate",
            Command::ClusterEval => "cluster-eval",
            Command::Gradcam => "gradcam",
            Command::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// Paths inside one experiment's output directory.
#[derive(Debug, Clone)]
pub struct RunDirectory {
    root: PathBuf,
}

impl RunDirectory {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn inpaint(&self, arch: Arch) -> PathBuf {
        self.root.join("inpaint").join(arch.name())
    }

    pub fn classifier(&self, arch: Arch, mode: TrainMode) -> PathBuf {
        self.root.join("classifier").join(arch.name()).join(mode.name())
    }

    pub fn embeddings(&self, arch: Arch) -> PathBuf {
        self.root.join("embeddings").join(arch.name())
    }

    pub fn clustering(&self) -> PathBuf {
        self.root.join("clustering")
    }

    pub fn gradcam(&self, arch: Arch, mode: TrainMode) -> PathBuf {
        self.root.join("gradcam").join(arch.name()).join(mode.name())
    }

    pub fn ablation(&self) -> PathBuf {
        self.root.join("ablation")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn is_complete(dir: &Path) -> bool {
        dir.join(MARKER).is_file()
    }

    pub fn mark_complete(dir: &Path, command: Command) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MARKER);
        std::fs::write(&path, format!("{command}\n")).map_err(|e| Error::io(&path, e))
    }

    /// Errors unless `dir` holds a completion marker, naming the command
    /// that produces it.
    pub fn require(dir: &Path, what: &str, command: Command) -> Result<()> {
        if Self::is_complete(dir) {
            Ok(())
        } else {
            Err(Error::MissingPrerequisite { what: format!("{what} ({})", dir.display()), command: command.name() })
        }
    }

    fn clear_marker(dir: &Path) -> Result<()> {
        let path = dir.join(MARKER);
        if path.exists() {
            std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub(crate) fn ensure(dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
    }
}

/// Architectures and modes one command invocation covers.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub archs: Vec<Arch>,
    pub modes: Vec<TrainMode>,
}

impl Selection {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self { archs: cfg.archs.clone(), modes: cfg.modes.clone() }
    }
}

/// Runs `command` for `cfg`, writing into `cfg.out`. The configuration is
/// snapshotted into the run directory by `prepare-data`.
pub fn run(command: Command, cfg: &ExperimentConfig, sel: &Selection) -> Result<()> {
    let run = RunDirectory::new(&cfg.out);
    match command {
        Command::PrepareData => cmd_prepare_data(cfg, &run),
        Command::TrainInpaint => cmd_train_inpaint(cfg, &run, sel),
        Command::TrainClassifier => cmd_train_classifier(cfg, &run, sel),
        Command::Ablate => cmd_ablate(cfg, &run, sel),
        Command::ClusterEval => cmd_cluster_eval(cfg, &run, sel),
        Command::Gradcam => cmd_gradcam(cfg, &run, sel),
        Command::Report => cmd_report(&run),
    }
}

/// Every command in order; the whole experiment.
pub fn run_all(cfg: &ExperimentConfig) -> Result<()> {
    let sel = Selection::from_config(cfg);
    for c in Command::ALL {
        log::info!("running {c}");
        run(c, cfg, &sel)?;
    }
    Ok(())
}

/// Writes `text` to `path`, creating parent directories.
pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        RunDirectory::ensure(dir)?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
