use std::path::Path;

use candle_core::Tensor;
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::discriminator::hinge_discriminator_loss;
use super::edgeconnect::{edge_bce, grayscale, sobel_edges};
use super::loss::{generator_loss_tensor, LossBreakdown};
use super::perceptual::FeatureNet;
use super::{CheckpointInfo, InpaintingModel};
use crate::batch::SampleBatch;
use crate::data::{DatasetSplits, Sample};
use crate::{Error, Result};

/// Seed of the frozen perceptual feature net; shared by every run.
pub const FEATURE_NET_SEED: u64 = 0x5eed_fea7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Validation cadence in iterations; `None` evaluates once per epoch.
    pub val_every: Option<usize>,
    /// Shuffling seed.
    pub seed: u64,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self { epochs: 10, batch_size: 8, lr: 1e-4, beta1: 0.5, beta2: 0.999, val_every: None, seed: 0 }
    }
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        if self.val_every == Some(0) {
            return Err(Error::Config("val_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub iteration: usize,
    pub epoch: usize,
    pub split: Split,
    pub losses: LossBreakdown,
    /// EdgeConnect edge-stage loss.
    pub edge: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestCheckpoint {
    pub iteration: usize,
    pub val_total_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
    pub best_checkpoint: Option<BestCheckpoint>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    iteration: usize,
    epoch: usize,
    split: Split,
    l1: f64,
    adversarial: f64,
    perceptual: f64,
    feature_matching: f64,
    style: f64,
    total: f64,
    edge: Option<f64>,
}

impl TrainingLog {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Mean of `f` over one epoch's records of a split.
    pub fn epoch_mean(&self, split: Split, epoch: usize, f: impl Fn(&LossBreakdown) -> f64) -> Option<f64> {
        let v: Vec<f64> = self.split(split).filter(|r| r.epoch == epoch).map(|r| f(&r.losses)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn last_epoch(&self) -> usize {
        self.records.iter().map(|r| r.epoch).max().unwrap_or(0)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            let l = r.losses;
            w.serialize(CsvRow {
                iteration: r.iteration,
                epoch: r.epoch,
                split: r.split,
                l1: l.l1,
                adversarial: l.adversarial,
                perceptual: l.perceptual,
                feature_matching: l.feature_matching,
                style: l.style,
                total: l.total,
                edge: r.edge,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a log written by [`write_csv`](Self::write_csv); the best
    /// checkpoint is recomputed from the validation rows.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut log = TrainingLog::default();
        for row in r.deserialize::<CsvRow>() {
            let row = row?;
            log.records.push(LogRecord {
                iteration: row.iteration,
                epoch: row.epoch,
                split: row.split,
                losses: LossBreakdown {
                    l1: row.l1,
                    adversarial: row.adversarial,
                    perceptual: row.perceptual,
                    feature_matching: row.feature_matching,
                    style: row.style,
                    total: row.total,
                },
                edge: row.edge,
            });
        }
        log.best_checkpoint = log
            .split(Split::Val)
            .fold(None, |best: Option<BestCheckpoint>, r| match best {
                Some(b) if b.val_total_loss <= r.losses.total => Some(b),
                _ => Some(BestCheckpoint { iteration: r.iteration, val_total_loss: r.losses.total }),
            });
        Ok(log)
    }
}

/// Mean generator loss over `samples` in evaluation mode.
pub fn evaluate_generator_loss(
    model: &InpaintingModel,
    samples: &[Sample],
    batch_size: usize,
    features: &FeatureNet,
) -> Result<LossBreakdown> {
    let mut parts = Vec::new();
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let b = SampleBatch::new(&refs, model.dtype())?;
        let raw = model.forward(&b.input, false)?.raw;
        let comp = composite_tensor(&raw, &b.images, &b.masks)?;
        let loss = generator_loss_tensor(&comp, &b.images, &model.discriminator, features, &model.config.loss_weights)?;
        parts.push((loss.breakdown, chunk.len() as f64));
    }
    Ok(LossBreakdown::weighted_mean(&parts))
}

/// `raw ⊙ M + target ⊙ (1 − M)`.
pub fn composite_tensor(raw: &Tensor, target: &Tensor, masks: &Tensor) -> Result<Tensor> {
    let keep = (masks.ones_like()? - masks)?;
    Ok((raw.broadcast_mul(masks)? + target.broadcast_mul(&keep)?)?)
}

fn adam(vars: Vec<candle_core::Var>, s: &TrainingSchedule) -> Result<AdamW> {
    Ok(AdamW::new(vars, ParamsAdamW { lr: s.lr, beta1: s.beta1, beta2: s.beta2, eps: 1e-8, weight_decay: 0.0 })?)
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
}

/// Adversarial training with alternating discriminator and generator steps.
///
/// After each validation pass the parameters are kept in memory if the
/// validation total is the lowest so far (and written to `best.safetensors`
/// when `out_dir` is given). On return the model holds the best parameters.
/// A non-finite loss restores them and aborts.
pub fn train_inpainting(
    model: &mut InpaintingModel,
    splits: &DatasetSplits,
    schedule: &TrainingSchedule,
    out_dir: Option<&Path>,
) -> Result<TrainingLog> {
    schedule.validate()?;
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(Error::Dataset("inpainting training needs non-empty train and val splits".into()));
    }
    let features = FeatureNet::new(FEATURE_NET_SEED, model.dtype())?;
    let mut opt_g = adam(model.generator.trainable_vars(), schedule)?;
    let mut opt_d = adam(model.discriminator_params.trainable_vars(), schedule)?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    let mut log = TrainingLog::default();
    let mut best = model.snapshot()?;
    let weights = model.config.loss_weights;
    let batches_per_epoch = splits.train.len().div_ceil(schedule.batch_size);
    let mut iteration = 0;

    for epoch in 1..=schedule.epochs {
        order.shuffle(&mut rng);
        for (bi, chunk) in order.chunks(schedule.batch_size).enumerate() {
            iteration += 1;
            let refs: Vec<&Sample> = chunk.iter().map(|&i| &splits.train[i]).collect();
            let b = SampleBatch::new(&refs, model.dtype())?;
            let trace = model.forward(&b.input, true)?;
            let comp = composite_tensor(&trace.raw, &b.images, &b.masks)?;

            let d_real = model.discriminator.forward(&b.images)?;
            let d_fake = model.discriminator.forward(&comp.detach())?;
            let d_loss = hinge_discriminator_loss(&d_real.scores, &d_fake.scores)?;
            if !scalar(&d_loss)?.is_finite() {
                return abort(model, &best, &log, out_dir, "discriminator", iteration);
            }
            opt_d.step(&d_loss.backward()?)?;

            let g = generator_loss_tensor(&comp, &b.images, &model.discriminator, &features, &weights)?;
            if let Some(component) = g.breakdown.non_finite() {
                return abort(model, &best, &log, out_dir, component, iteration);
            }
            let mut objective = g.total;
            let mut edge = None;
            if let Some(pred) = &trace.edge_pred {
                let target = sobel_edges(&grayscale(&b.images)?)?;
                let e = edge_bce(pred, &target)?;
                let v = scalar(&e)?;
                if !v.is_finite() {
                    return abort(model, &best, &log, out_dir, "edge", iteration);
                }
                edge = Some(v);
                objective = (objective + e)?;
            }
            opt_g.step(&objective.backward()?)?;
            log.records.push(LogRecord { iteration, epoch, split: Split::Train, losses: g.breakdown, edge });

            let end_of_epoch = bi + 1 == batches_per_epoch;
            let due = match schedule.val_every {
                Some(k) => iteration % k == 0,
                None => end_of_epoch,
            };
            if due {
                let val = evaluate_generator_loss(model, &splits.val, schedule.batch_size, &features)?;
                if let Some(component) = val.non_finite() {
                    return abort(model, &best, &log, out_dir, component, iteration);
                }
                log.records.push(LogRecord { iteration, epoch, split: Split::Val, losses: val, edge: None });
                if log.best_checkpoint.is_none_or(|b| val.total < b.val_total_loss) {
                    log.best_checkpoint = Some(BestCheckpoint { iteration, val_total_loss: val.total });
                    best = model.snapshot()?;
                    if let Some(dir) = out_dir {
                        model.save_checkpoint(&dir.join("best.safetensors"), CheckpointInfo { iteration, val_loss: val.total })?;
                    }
                }
            }
        }
        if let Some(mean) = log.epoch_mean(Split::Train, epoch, |l| l.l1) {
            log::info!("{} epoch {epoch}/{}: train l1 {mean:.4}", model.arch, schedule.epochs);
        }
    }

    if let Some(dir) = out_dir {
        let last_val = log.split(Split::Val).last().map_or(f64::NAN, |r| r.losses.total);
        model.save_checkpoint(&dir.join("last.safetensors"), CheckpointInfo { iteration, val_loss: last_val })?;
        log.write_csv(&dir.join("log.csv"))?;
    }
    model.restore(&best)?;
    Ok(log)
}

type Snapshot = (std::collections::BTreeMap<String, Tensor>, std::collections::BTreeMap<String, Tensor>);

fn abort(
    model: &InpaintingModel,
    best: &Snapshot,
    log: &TrainingLog,
    out_dir: Option<&Path>,
    component: &str,
    iteration: usize,
) -> Result<TrainingLog> {
    model.restore(best)?;
    if let Some(dir) = out_dir {
        log.write_csv(&dir.join("log.csv"))?;
    }
    Err(Error::Diverged { component: component.to_string(), iteration })
}
