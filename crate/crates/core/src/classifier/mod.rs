//! Linear softmax head on an isolated encoder, trained with the encoder
//! frozen (shallow) or jointly (deep).

mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use candle_core::{DType, Tensor, Var};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use metrics::{argmax, compute_metrics, softmax, ClassCounts, ClassificationMetrics};

use crate::data::Sample;
use crate::encoder::{flatten_hwc, Backbone, Encoder};
use crate::inpaint::ArchitectureConfig;
use crate::nn::{save_stores, Linear, ParamStore};
use crate::tensor::ImageTensor;
use crate::{Error, Result};

const HEAD_PREFIX: &str = "head.";
const CHECKPOINT_FORMAT: &str = "patreid-classifier-1";
/// Samples per forward pass during evaluation.
pub const EVAL_BATCH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Shallow,
    Deep,
}

impl TrainMode {
    pub const ALL: [TrainMode; 2] = [TrainMode::Shallow, TrainMode::Deep];

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Shallow => "shallow",
            TrainMode::Deep => "deep",
        }
    }

    pub fn default_lr(self) -> f64 {
        match self {
            TrainMode::Shallow => 1e-3,
            TrainMode::Deep => 1e-4,
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shallow" => Ok(TrainMode::Shallow),
            "deep" => Ok(TrainMode::Deep),
            _ => Err(Error::Config(format!("unknown training mode `{s}`; valid options: shallow, deep"))),
        }
    }
}

pub struct ClassifierModel {
    encoder: Encoder,
    head_store: ParamStore,
    head: Linear,
    classes: usize,
    mode: Option<TrainMode>,
}

/// Linear head with weights uniform in ±1/sqrt(D) and zero bias.
pub fn attach_head(encoder: Encoder, classes: usize, seed: u64) -> Result<ClassifierModel> {
    ClassifierModel::new(encoder, classes, seed, false)
}

/// All-zero head; predicts the uniform distribution.
pub fn attach_zero_head(encoder: Encoder, classes: usize) -> Result<ClassifierModel> {
    ClassifierModel::new(encoder, classes, 0, true)
}

impl ClassifierModel {
    fn new(encoder: Encoder, classes: usize, seed: u64, zero: bool) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Config(format!("a classifier needs at least 2 classes, got {classes}")));
        }
        let mut head_store = ParamStore::new(seed, encoder.params().dtype());
        let d = encoder.embedding_len();
        let head = if zero {
            Linear::zeros(&mut head_store, "head", d, classes)?
        } else {
            Linear::new(&mut head_store, "head", d, classes)?
        };
        Ok(Self { encoder, head_store, head, classes, mode: None })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn head_params(&self) -> &ParamStore {
        &self.head_store
    }

    pub fn head_weight(&self) -> &Tensor {
        &self.head.weight
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn mode(&self) -> Option<TrainMode> {
        self.mode
    }

    pub fn logits(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        self.head.forward(&self.encoder.embed_tensor(x, train)?)
    }

    /// Evaluation-mode logits with the activation after encoder layer `layer`
    /// exposed as a variable, for gradient-based attribution.
    pub fn logits_with_activation(&self, x: &Tensor, layer: usize) -> Result<(Var, Tensor)> {
        let net = self.encoder.network();
        let act = Var::from_tensor(&net.forward_range(x, 0, layer + 1, false)?.detach())?;
        let feat = net.forward_range(act.as_tensor(), layer + 1, net.len(), false)?;
        Ok((act.clone(), self.head.forward(&flatten_hwc(&feat)?)?))
    }

    fn probabilities(&self, logits: &Tensor) -> Result<Vec<Vec<f64>>> {
        let rows: Vec<Vec<f64>> = logits.to_dtype(DType::F64)?.to_vec2()?;
        Ok(rows.iter().map(|r| softmax(r)).collect())
    }

    pub fn predict_images(&self, images: &[&ImageTensor]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(EVAL_BATCH) {
            let x = self.encoder.input_tensor(chunk)?;
            out.extend(self.probabilities(&self.logits(&x, false)?)?);
        }
        Ok(out)
    }

    /// Class probabilities `p = softmax(head(g(I ⊕ 0)))`.
    pub fn predict(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        Ok(self.predict_images(&[image])?.remove(0))
    }

    pub fn evaluate(&self, samples: &[Sample]) -> Result<ClassificationMetrics> {
        let truth = labels(samples, self.classes)?;
        let probs = self.predict_images(&samples.iter().map(|s| &s.image).collect::<Vec<_>>())?;
        compute_metrics(&truth, &probs)
    }

    fn snapshot(&self) -> Result<(BTreeMap<String, Tensor>, BTreeMap<String, Tensor>)> {
        Ok((self.encoder.params().snapshot()?, self.head_store.snapshot()?))
    }

    fn restore(&self, s: &(BTreeMap<String, Tensor>, BTreeMap<String, Tensor>)) -> Result<()> {
        self.encoder.params().restore(&s.0)?;
        self.head_store.restore(&s.1)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let (h, w) = self.encoder.input_size();
        let meta = BTreeMap::from([
            ("format".to_string(), CHECKPOINT_FORMAT.to_string()),
            ("arch".to_string(), self.encoder.backbone().name().to_string()),
            ("config".to_string(), serde_json::to_string(self.encoder.config())?),
            ("classes".to_string(), self.classes.to_string()),
            ("input_size".to_string(), format!("{h}x{w}")),
            ("mode".to_string(), self.mode.map_or("none", TrainMode::name).to_string()),
        ]);
        save_stores(&[self.encoder.params(), &self.head_store], path, &meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (mut store, meta) = ParamStore::load(path, 0, DType::F32)?;
        let field = |k: &str| {
            meta.get(k)
                .ok_or_else(|| Error::Checkpoint(format!("{} has no `{k}` entry", path.display())))
        };
        if field("format")? != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("{} is not a classifier checkpoint", path.display())));
        }
        let bad = |k: &str| Error::Checkpoint(format!("malformed `{k}` in {}", path.display()));
        let backbone: Backbone = field("arch")?.parse()?;
        let config: ArchitectureConfig = serde_json::from_str(field("config")?)?;
        let classes: usize = field("classes")?.parse().map_err(|_| bad("classes"))?;
        let (h, w) = field("input_size")?.split_once('x').ok_or_else(|| bad("input_size"))?;
        let size = (h.parse().map_err(|_| bad("input_size"))?, w.parse().map_err(|_| bad("input_size"))?);
        let mode = field("mode")?.parse().ok();
        let mut head_store = store.take_prefix(HEAD_PREFIX);
        let encoder = Encoder::from_params(backbone, config, store, size)?;
        let n = head_store.len();
        let head = Linear::new(&mut head_store, "head", encoder.embedding_len(), classes)?;
        if head_store.len() != n {
            return Err(Error::Checkpoint(format!("{} has no classification head", path.display())));
        }
        Ok(Self { encoder, head_store, head, classes, mode })
    }
}

fn labels(samples: &[Sample], classes: usize) -> Result<Vec<usize>> {
    samples
        .iter()
        .map(|s| match s.label {
            Some(l) if l < classes => Ok(l),
            Some(l) => Err(Error::Dataset(format!("label {l} of `{}` outside 0..{classes}", s.source_id))),
            None => Err(Error::Dataset(format!("sample `{}` has no label", s.source_id))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    /// Defaults to [`TrainMode::default_lr`].
    pub lr: Option<f64>,
    pub seed: u64,
}

impl Default for ClassifierSchedule {
    fn default() -> Self {
        Self { epochs: 15, batch_size: 8, lr: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: EvalSplit,
    pub metrics: ClassificationMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierLog {
    pub mode: TrainMode,
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (highest validation accuracy, earliest on ties).
    pub best_epoch: usize,
    pub test: Option<ClassificationMetrics>,
}

#[derive(Serialize)]
struct CsvRow {
    epoch: usize,
    split: EvalSplit,
    accuracy: f64,
    recall: f64,
    f1: f64,
    cross_entropy: f64,
}

impl ClassifierLog {
    pub fn val(&self) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(|r| r.split == EvalSplit::Val)
    }

    /// Rows `epoch,split,accuracy,recall,f1,cross_entropy`; the test row
    /// carries the selected epoch.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut w = csv::Writer::from_path(path)?;
        let test = self.test.iter().map(|m| EpochRecord { epoch: self.best_epoch, split: EvalSplit::Test, metrics: m.clone() });
        for r in self.records.iter().cloned().chain(test) {
            w.serialize(CsvRow {
                epoch: r.epoch,
                split: r.split,
                accuracy: r.metrics.accuracy,
                recall: r.metrics.macro_recall,
                f1: r.metrics.macro_f1,
                cross_entropy: r.metrics.cross_entropy,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Called after every epoch with the epoch number and the current model.
pub type EpochObserver<'a> = &'a mut dyn FnMut(usize, &ClassifierModel) -> Result<()>;

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

/// Cross-entropy training with per-epoch validation. Keeps the parameters of
/// the epoch with the highest validation accuracy and evaluates them on the
/// test split (when non-empty).
pub fn train_classifier(
    clf: &mut ClassifierModel,
    splits: &crate::data::DatasetSplits,
    mode: TrainMode,
    schedule: &ClassifierSchedule,
    mut observer: Option<EpochObserver<'_>>,
) -> Result<ClassifierLog> {
    if schedule.epochs == 0 || schedule.batch_size == 0 {
        return Err(Error::Config("epochs and batch_size must be positive".into()));
    }
    let lr = schedule.lr.unwrap_or(mode.default_lr());
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    if splits.train.is_empty() || splits.val.is_empty() {
        return Err(Error::Dataset("classifier training needs non-empty train and val splits".into()));
    }
    let train_labels = labels(&splits.train, clf.classes)?;
    labels(&splits.val, clf.classes)?;
    labels(&splits.test, clf.classes)?;
    clf.mode = Some(mode);

    let mut vars = clf.head_store.trainable_vars();
    if mode == TrainMode::Deep {
        vars.extend(clf.encoder.params().trainable_vars());
    }
    let mut opt = AdamW::new(vars, ParamsAdamW { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 })?;
    let dev = clf.head.weight.device().clone();

    // Frozen features are fixed, so shallow mode embeds once.
    let cached = match mode {
        TrainMode::Shallow => {
            let images: Vec<&ImageTensor> = splits.train.iter().map(|s| &s.image).collect();
            let mut rows = Vec::new();
            for chunk in images.chunks(EVAL_BATCH) {
                rows.push(clf.encoder.embed_tensor(&clf.encoder.input_tensor(chunk)?, false)?.detach());
            }
            Some(Tensor::cat(&rows, 0)?)
        }
        TrainMode::Deep => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    let mut log = ClassifierLog { mode, records: Vec::new(), best_epoch: 0, test: None };
    let mut best: Option<(f64, _)> = None;
    let mut step = 0;

    for epoch in 1..=schedule.epochs {
        order.shuffle(&mut rng);
        let (mut truth, mut probs) = (Vec::new(), Vec::new());
        for chunk in order.chunks(schedule.batch_size) {
            step += 1;
            let y: Vec<u32> = chunk.iter().map(|&i| train_labels[i] as u32).collect();
            let logits = match &cached {
                Some(e) => {
                    let idx = Tensor::from_vec(chunk.iter().map(|&i| i as u32).collect::<Vec<_>>(), chunk.len(), &dev)?;
                    clf.head.forward(&e.index_select(&idx, 0)?)?
                }
                None => {
                    let images: Vec<&ImageTensor> = chunk.iter().map(|&i| &splits.train[i].image).collect();
                    clf.logits(&clf.encoder.input_tensor(&images)?, true)?
                }
            };
            let target = Tensor::from_vec(y.clone(), chunk.len(), &dev)?;
            let loss = candle_nn::loss::cross_entropy(&logits.to_dtype(DType::F32)?, &target)?;
            if !scalar(&loss)?.is_finite() {
                if let Some((_, snap)) = &best {
                    clf.restore(snap)?;
                }
                return Err(Error::Diverged { component: "cross_entropy".into(), iteration: step });
            }
            opt.step(&loss.backward()?)?;
            truth.extend(y.iter().map(|&v| v as usize));
            probs.extend(clf.probabilities(&logits.detach())?);
        }
        log.records.push(EpochRecord { epoch, split: EvalSplit::Train, metrics: compute_metrics(&truth, &probs)? });
        let val = clf.evaluate(&splits.val)?;
        log::info!(
            "{} {mode} epoch {epoch}/{}: val accuracy {:.3}",
            clf.encoder.backbone(),
            schedule.epochs,
            val.accuracy
        );
        if best.as_ref().is_none_or(|(acc, _)| val.accuracy > *acc) {
            best = Some((val.accuracy, clf.snapshot()?));
            log.best_epoch = epoch;
        }
        log.records.push(EpochRecord { epoch, split: EvalSplit::Val, metrics: val });
        if let Some(obs) = observer.as_mut() {
            obs(epoch, clf)?;
        }
    }
    if let Some((_, snap)) = &best {
        clf.restore(snap)?;
    }
    if !splits.test.is_empty() {
        log.test = Some(clf.evaluate(&splits.test)?);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inpaint::Arch;

    fn tiny_encoder() -> Encoder {
        let mut cfg = ArchitectureConfig::desk(Arch::AotGan);
        cfg.base_channels = 4;
        cfg.dilation_rates = vec![1, 2];
        Encoder::random(Arch::AotGan, cfg, 0, (16, 16)).unwrap()
    }

    #[test]
    fn head_shape_and_determinism() {
        let a = attach_head(tiny_encoder(), 6, 3).unwrap();
        assert_eq!(a.head_weight().dims(), &[6, a.encoder().embedding_len()]);
        let b = attach_head(tiny_encoder(), 6, 3).unwrap();
        assert_eq!(a.head_params().checksum().unwrap(), b.head_params().checksum().unwrap());
        assert!(attach_head(tiny_encoder(), 1, 0).is_err());
    }

    #[test]
    fn zero_head_predicts_uniform() {
        let c = attach_zero_head(tiny_encoder(), 6).unwrap();
        let img = ImageTensor::from_fn(16, 16, 3, |y, x, ch| ((y + x + ch) % 5) as f32 / 4.0);
        for p in c.predict(&img).unwrap() {
            assert!((p - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn modes_parse() {
        assert_eq!("Deep".parse::<TrainMode>().unwrap(), TrainMode::Deep);
        assert!("medium".parse::<TrainMode>().is_err());
    }
}
