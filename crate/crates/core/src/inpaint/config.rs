use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    AotGan,
    DeepFillV2,
    EdgeConnect,
    Lama,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::AotGan, Arch::DeepFillV2, Arch::EdgeConnect, Arch::Lama];

    pub fn name(self) -> &'static str {
        match self {
            Arch::AotGan => "aotgan",
            Arch::DeepFillV2 => "deepfillv2",
            Arch::EdgeConnect => "edgeconnect",
            Arch::Lama => "lama",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownArch(s.to_string()))
    }
}

/// Generator loss weights. Components with weight zero are still reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub l1: f64,
    pub adversarial: f64,
    pub perceptual: f64,
    pub feature_matching: f64,
    pub style: f64,
}

impl LossWeights {
    pub fn for_arch(arch: Arch) -> Self {
        let (style, feature_matching) = match arch {
            Arch::AotGan | Arch::Lama => (120.0, 0.0),
            Arch::EdgeConnect => (0.0, 10.0),
            Arch::DeepFillV2 => (0.0, 0.0),
        };
        Self { l1: 1.0, adversarial: 0.01, perceptual: 0.1, feature_matching, style }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.l1, self.adversarial, self.perceptual, self.feature_matching, self.style];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!("loss weights must be finite and non-negative: {self:?}")));
        }
        if self.l1 <= 0.0 {
            return Err(Error::Config("the l1 loss weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub base_channels: usize,
    /// Bottleneck blocks; EdgeConnect reads a second entry for its edge stage.
    pub block_counts: Vec<usize>,
    /// AOT branch dilations, or the DeepFill bottleneck dilations.
    pub dilation_rates: Vec<usize>,
    /// EdgeConnect only: run the edge generator in front of the inpainter.
    pub edge_stage: bool,
    /// LaMa only: Fourier unit in the global path (plain conv otherwise).
    pub spectral_branch: bool,
    pub loss_weights: LossWeights,
}

impl ArchitectureConfig {
    /// Small widths for 64×64 synthetic data.
    pub fn desk(arch: Arch) -> Self {
        let (block_counts, dilation_rates) = match arch {
            Arch::AotGan => (vec![2], vec![1, 2, 4, 8]),
            Arch::DeepFillV2 => (vec![1], vec![2, 4, 8]),
            Arch::EdgeConnect => (vec![2, 1], vec![]),
            Arch::Lama => (vec![2], vec![]),
        };
        Self {
            base_channels: 16,
            block_counts,
            dilation_rates,
            edge_stage: arch == Arch::EdgeConnect,
            spectral_branch: arch == Arch::Lama,
            loss_weights: LossWeights::for_arch(arch),
        }
    }

    /// Widths and depths of the published models.
    pub fn full(arch: Arch) -> Self {
        let mut cfg = Self::desk(arch);
        match arch {
            Arch::AotGan => {
                cfg.base_channels = 64;
                cfg.block_counts = vec![8];
            }
            Arch::DeepFillV2 => {
                cfg.base_channels = 48;
                cfg.dilation_rates = vec![2, 4, 8, 16];
            }
            Arch::EdgeConnect => {
                cfg.base_channels = 64;
                cfg.block_counts = vec![8, 8];
            }
            Arch::Lama => {
                cfg.base_channels = 64;
                cfg.block_counts = vec![9];
            }
        }
        cfg
    }

    pub fn validate(&self, arch: Arch) -> Result<()> {
        self.loss_weights.validate()?;
        if self.base_channels < 4 || self.base_channels % 4 != 0 {
            return Err(Error::Config(format!(
                "base_channels must be a positive multiple of 4, got {}",
                self.base_channels
            )));
        }
        if self.block_counts.is_empty() {
            return Err(Error::Config("block_counts must not be empty".into()));
        }
        if arch == Arch::AotGan && (self.dilation_rates.is_empty() || (4 * self.base_channels) % self.dilation_rates.len() != 0) {
            return Err(Error::Config(format!(
                "aotgan needs dilation rates dividing {} channels, got {:?}",
                4 * self.base_channels,
                self.dilation_rates
            )));
        }
        if self.dilation_rates.contains(&0) {
            return Err(Error::Config("dilation rates must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn blocks(&self, i: usize) -> usize {
        self.block_counts.get(i).copied().unwrap_or(self.block_counts[0])
    }
}
