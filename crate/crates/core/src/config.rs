//! Experiment configuration, stored as TOML.
//!
//! Every key is optional; missing keys take the defaults below. A complete
//! file looks like this:
//!
//! ```toml
//! seed = 0
//! out = "runs/synthetic"
//! archs = ["aotgan", "deepfillv2", "edgeconnect", "lama"]
//! modes = ["shallow", "deep"]
//! scale = "desk"                  # or "full" for the published widths
//!
//! [dataset]
//! source = "synthetic"            # or "manifest"
//! n_individuals = 6
//! n_per_individual = 100
//! inpaint_per_individual = 25
//! size = 64
//! # classification_manifest = "data/classification.csv"
//! # inpainting_manifest = "data/inpainting.csv"
//! # region_manifest = "data/regions.csv"
//!
//! [inpainting]                    # generator pre-training
//! epochs = 10
//! batch_size = 8
//! lr = 0.0001
//! beta1 = 0.5
//! beta2 = 0.999
//!
//! [classifier]
//! epochs = 15
//! batch_size = 8
//!
//! [ablation]
//! backbones = ["aotgan", "deepfillv2", "edgeconnect", "lama", "baseline"]
//! epochs = 5
//! per_class = 300
//! split = "all"
//!
//! [clustering]
//! k = 6
//! standardize = false
//! projections = ["pca", "tsne"]
//!
//! [gradcam]
//! per_class = 1
//! alpha = 0.5
//!
//! [architectures.lama]            # optional per-architecture override
//! base_channels = 16
//! block_counts = [2]
//! dilation_rates = []
//! edge_stage = false
//! spectral_branch = true
//! loss_weights = { l1 = 1.0, adversarial = 0.01, perceptual = 0.1, feature_matching = 0.0, style = 120.0 }
//! ```
//!
//! Manifests use the CSV layout of [`crate::data::manifest`]; paths inside
//! them are relative to the manifest's directory. The region manifest has
//! columns `source_id,background_path,fish_path,pattern_path`; a single row
//! with `source_id` `*` applies to every image.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierSchedule, TrainMode};
use crate::encoder::Backbone;
use crate::inpaint::{Arch, ArchitectureConfig, TrainingSchedule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    #[default]
    Synthetic,
    Manifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    pub n_individuals: usize,
    pub n_per_individual: usize,
    pub inpaint_per_individual: usize,
    /// Image side length; manifest images are resized to it.
    pub size: usize,
    pub classification_manifest: Option<PathBuf>,
    pub inpainting_manifest: Option<PathBuf>,
    pub region_manifest: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DatasetSource::Synthetic,
            n_individuals: 6,
            n_per_individual: 100,
            inpaint_per_individual: 25,
            size: 64,
            classification_manifest: None,
            inpainting_manifest: None,
            region_manifest: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelScale {
    #[default]
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub backbones: Vec<Backbone>,
    /// Fine-tuning epochs per cell.
    pub epochs: usize,
    pub per_class: usize,
    /// Classification split the images come from: `all`, `train`, `val` or `test`.
    pub split: String,
}

impl Default for AblationConfig {
    fn default() -> Self {
        let mut backbones: Vec<Backbone> = Arch::ALL.into_iter().map(Backbone::from).collect();
        backbones.push(Backbone::Baseline);
        Self { backbones, epochs: 5, per_class: 300, split: "all".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringConfig {
    pub k: usize,
    pub standardize: bool,
    pub projections: Vec<String>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self { k: 6, standardize: false, projections: vec!["pca".into(), "tsne".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcamConfig {
    /// Test images visualised per individual.
    pub per_class: usize,
    pub alpha: f32,
}

impl Default for GradcamConfig {
    fn default() -> Self {
        Self { per_class: 1, alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub archs: Vec<Arch>,
    pub modes: Vec<TrainMode>,
    pub scale: ModelScale,
    pub dataset: DatasetConfig,
    pub inpainting: TrainingSchedule,
    pub classifier: ClassifierSchedule,
    pub ablation: AblationConfig,
    pub clustering: ClusteringConfig,
    pub gradcam: GradcamConfig,
    pub architectures: BTreeMap<Arch, ArchitectureConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs/synthetic"),
            archs: Arch::ALL.to_vec(),
            modes: TrainMode::ALL.to_vec(),
            scale: ModelScale::Desk,
            dataset: DatasetConfig::default(),
            inpainting: TrainingSchedule::default(),
            classifier: ClassifierSchedule::default(),
            ablation: AblationConfig::default(),
            clustering: ClusteringConfig::default(),
            gradcam: GradcamConfig::default(),
            architectures: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// Sets the run seed and every schedule seed derived from it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.inpainting.seed = seed;
        self.classifier.seed = seed;
    }

    pub fn arch_config(&self, arch: Arch) -> ArchitectureConfig {
        self.architectures.get(&arch).cloned().unwrap_or_else(|| match self.scale {
            ModelScale::Desk => ArchitectureConfig::desk(arch),
            ModelScale::Full => ArchitectureConfig::full(arch),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.archs.is_empty() {
            return Err(Error::Config("`archs` must list at least one architecture".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("`modes` must list at least one training mode".into()));
        }
        self.inpainting.validate()?;
        if self.classifier.epochs == 0 || self.classifier.batch_size == 0 {
            return Err(Error::Config("classifier epochs and batch_size must be positive".into()));
        }
        for (&arch, cfg) in &self.architectures {
            cfg.validate(arch)?;
        }
        let d = &self.dataset;
        if d.size < 16 || d.size % 4 != 0 {
            return Err(Error::Config(format!("dataset.size must be a multiple of 4 and at least 16, got {}", d.size)));
        }
        if d.source == DatasetSource::Manifest && d.classification_manifest.is_none() {
            return Err(Error::Config("dataset.source = \"manifest\" needs dataset.classification_manifest".into()));
        }
        if self.ablation.epochs == 0 || self.ablation.per_class == 0 {
            return Err(Error::Config("ablation epochs and per_class must be positive".into()));
        }
        if !matches!(self.ablation.split.as_str(), "all" | "train" | "val" | "test") {
            return Err(Error::Config(format!(
                "ablation.split must be all, train, val or test, got `{}`",
                self.ablation.split
            )));
        }
        if self.clustering.k < 1 {
            return Err(Error::Config("clustering.k must be positive".into()));
        }
        for p in &self.clustering.projections {
            p.parse::<patreid_analytics::ProjectionMethod>().map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(0.0..=1.0).contains(&self.gradcam.alpha) {
            return Err(Error::Config(format!("gradcam.alpha must lie in [0, 1], got {}", self.gradcam.alpha)));
        }
        Ok(())
    }
}
