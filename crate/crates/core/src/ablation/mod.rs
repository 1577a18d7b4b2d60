//! Region-ablation study: which image regions a classifier relies on.

mod regions;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::{attach_head, train_classifier, ClassifierSchedule, TrainMode};
use crate::data::{build_classification_dataset_with, Sample, CLASSIFICATION_RATIOS};
use crate::encoder::{Backbone, Encoder};
use crate::{Error, Result};

pub use regions::{region_ablate, AblationCondition, Region, RegionMaskSet};
pub use report::{render_ablation_report, row_marks, AblationReport, CellMark};

/// Labeled images with their region annotations. A single region set is
/// broadcast to every image.
#[derive(Debug, Clone)]
pub struct AblationData {
    samples: Vec<Sample>,
    regions: Vec<RegionMaskSet>,
}

impl AblationData {
    pub fn new(samples: Vec<Sample>, regions: Vec<RegionMaskSet>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Dataset("ablation needs at least one sample".into()));
        }
        if regions.len() != 1 && regions.len() != samples.len() {
            return Err(Error::Dataset(format!(
                "{} samples but {} region sets; give one per sample or a single shared set",
                samples.len(),
                regions.len()
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.label.is_none() {
                return Err(Error::Dataset(format!("ablation sample `{}` has no label", s.source_id)));
            }
            let r = &regions[if regions.len() == 1 { 0 } else { i }];
            if r.shape() != (s.image.height(), s.image.width()) {
                return Err(Error::ShapeMismatch {
                    left: format!("image `{}` {}x{}", s.source_id, s.image.height(), s.image.width()),
                    right: format!("regions {:?}", r.shape()),
                });
            }
        }
        Ok(Self { samples, regions })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn regions(&self, i: usize) -> &RegionMaskSet {
        &self.regions[if self.regions.len() == 1 { 0 } else { i }]
    }

    /// Keeps the first `n` samples of every class, in order.
    pub fn limit_per_class(&self, n: usize) -> Self {
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        let keep: Vec<usize> = (0..self.samples.len())
            .filter(|&i| {
                let c = seen.entry(self.samples[i].label.expect("validated")).or_default();
                *c += 1;
                *c <= n
            })
            .collect();
        Self {
            samples: keep.iter().map(|&i| self.samples[i].clone()).collect(),
            regions: if self.regions.len() == 1 {
                self.regions.clone()
            } else {
                keep.iter().map(|&i| self.regions[i].clone()).collect()
            },
        }
    }

    /// `(image, label, id)` triples with `condition` applied.
    fn ablated(&self, condition: AblationCondition) -> Result<Vec<(crate::tensor::ImageTensor, usize, String)>> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let image = region_ablate(&s.image, self.regions(i), condition)?;
                Ok((image, s.label.expect("validated"), s.source_id.clone()))
            })
            .collect()
    }
}

/// A backbone to evaluate, or the reason it cannot be.
pub struct BackboneEntry {
    pub backbone: Backbone,
    /// Template encoder; every cell trains its own copy.
    pub encoder: std::result::Result<Encoder, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSchedule {
    pub classifier: ClassifierSchedule,
    /// Images used per individual (fewer when fewer exist).
    pub per_class: usize,
    pub split_seed: u64,
}

impl Default for AblationSchedule {
    fn default() -> Self {
        Self { classifier: ClassifierSchedule::default(), per_class: 300, split_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub backbone: Backbone,
    pub mode: TrainMode,
    /// Test accuracy per condition, in [`AblationCondition::ALL`] order;
    /// `None` for skipped cells.
    pub accuracy: [Option<f64>; 7],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCell {
    pub backbone: Backbone,
    pub mode: TrainMode,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    pub skipped: Vec<SkippedCell>,
}

impl AblationTable {
    pub fn get(&self, backbone: Backbone, mode: TrainMode, condition: AblationCondition) -> Option<f64> {
        let col = AblationCondition::ALL.iter().position(|&c| c == condition)?;
        self.rows
            .iter()
            .find(|r| r.backbone == backbone && r.mode == mode)
            .and_then(|r| r.accuracy[col])
    }

    /// Filled cells.
    pub fn len(&self) -> usize {
        self.rows.iter().map(|r| r.accuracy.iter().flatten().count()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Trains one classifier per (backbone, mode, condition) on region-ablated
/// images and records its test accuracy. Rows are ordered mode-major.
pub fn run_ablation(
    backbones: &[BackboneEntry],
    modes: &[TrainMode],
    data: &AblationData,
    schedule: &AblationSchedule,
) -> Result<AblationTable> {
    if schedule.per_class == 0 {
        return Err(Error::Config("ablation per_class must be positive".into()));
    }
    let data = data.limit_per_class(schedule.per_class);
    let classes = crate::data::class_count(data.samples());
    let splits: Vec<_> = AblationCondition::ALL
        .iter()
        .map(|&c| build_classification_dataset_with(data.ablated(c)?, CLASSIFICATION_RATIOS, schedule.split_seed))
        .collect::<Result<_>>()?;

    let mut table = AblationTable::default();
    for &mode in modes {
        for entry in backbones {
            let mut row = AblationRow { backbone: entry.backbone, mode, accuracy: [None; 7] };
            let template = match &entry.encoder {
                Ok(e) => e,
                Err(reason) => {
                    table.skipped.push(SkippedCell { backbone: entry.backbone, mode, reason: reason.clone() });
                    table.rows.push(row);
                    continue;
                }
            };
            for (col, (condition, split)) in AblationCondition::ALL.iter().zip(&splits).enumerate() {
                let mut clf = attach_head(template.deep_copy()?, classes, schedule.classifier.seed)?;
                let log = train_classifier(&mut clf, split, mode, &schedule.classifier, None)?;
                let acc = log.test.map(|m| m.accuracy).ok_or_else(|| {
                    Error::Dataset("ablation test split is empty; use more images per individual".into())
                })?;
                log::info!("ablation {} {mode} {}: {acc:.3}", entry.backbone, condition.name());
                row.accuracy[col] = Some(acc);
            }
            table.rows.push(row);
        }
    }
    Ok(table)
}
