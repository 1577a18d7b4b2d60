//! Encoder isolation and embeddings `E = g(I ⊕ 0)`.

use std::io::Write;
use std::path::Path;

use candle_core::{DType, Tensor};
use ndarray::Array2;

use crate::batch::images_to_tensor;
use crate::data::Sample;
use crate::inpaint::{build_encoder, Arch, ArchitectureConfig, InpaintingModel, ENCODER_PREFIX};
use crate::nn::{conv, Activation, ConvBlock, Layer, ParamStore, Sequential};
use crate::tensor::ImageTensor;
use crate::{Error, Result};

/// Feature extractor family: the encoder half of an inpainting generator, or
/// a small generic CNN trained from scratch for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Backbone {
    Inpainting(Arch),
    Baseline,
}

impl Backbone {
    pub fn name(self) -> &'static str {
        match self {
            Backbone::Inpainting(a) => a.name(),
            Backbone::Baseline => "baseline",
        }
    }

    pub fn arch(self) -> Option<Arch> {
        match self {
            Backbone::Inpainting(a) => Some(a),
            Backbone::Baseline => None,
        }
    }
}

impl std::fmt::Display for Backbone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("baseline") {
            return Ok(Backbone::Baseline);
        }
        s.parse().map(Backbone::Inpainting).map_err(|_| {
            Error::Config(format!("unknown backbone `{s}`; valid options: aotgan, deepfillv2, edgeconnect, lama, baseline"))
        })
    }
}

impl From<Backbone> for String {
    fn from(b: Backbone) -> Self {
        b.name().to_string()
    }
}

impl TryFrom<String> for Backbone {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Arch> for Backbone {
    fn from(a: Arch) -> Self {
        Backbone::Inpainting(a)
    }
}

/// Four conv/BN/ReLU stages, two of them strided: the same 4× spatial
/// reduction as the inpainting encoders.
fn baseline_network(store: &mut ParamStore, cfg: &ArchitectureConfig) -> Result<Sequential> {
    let c = cfg.base_channels;
    let stages = [(4, c, conv(3, 1, 1)), (c, 2 * c, conv(4, 2, 1)), (2 * c, 4 * c, conv(4, 2, 1)), (4 * c, 4 * c, conv(3, 1, 1))];
    let mut s = Sequential::new();
    for (i, (cin, cout, g)) in stages.into_iter().enumerate() {
        let name = format!("enc.base{}", i + 1);
        s.push(name.clone(), ConvBlock::new(store, &name, cin, cout, g, true, Activation::Relu)?);
    }
    Ok(s)
}

/// Front half of a generator with its own copy of the parameters.
pub struct Encoder {
    backbone: Backbone,
    config: ArchitectureConfig,
    store: ParamStore,
    network: Sequential,
    input_size: (usize, usize),
    /// `(H', W', C')` for `input_size`.
    output_shape: (usize, usize, usize),
}

/// Deep-copies the encoder parameters of `model` and rebuilds the encoder
/// layers around them. `input_size` is the `(H, W)` the encoder will accept.
pub fn isolate_encoder(model: &InpaintingModel, input_size: (usize, usize)) -> Result<Encoder> {
    let store = model.generator_params().deep_copy_prefix(ENCODER_PREFIX)?;
    if store.is_empty() {
        return Err(Error::MissingBoundary);
    }
    Encoder::from_store(model.arch().into(), model.config().clone(), store, input_size)
}

impl Encoder {
    /// Freshly initialised encoder, as used for the no-pretraining baseline.
    pub fn random(arch: Arch, config: ArchitectureConfig, seed: u64, input_size: (usize, usize)) -> Result<Self> {
        Self::random_as(arch, config, seed, input_size, DType::F32)
    }

    pub fn random_as(
        arch: Arch,
        config: ArchitectureConfig,
        seed: u64,
        input_size: (usize, usize),
        dtype: DType,
    ) -> Result<Self> {
        config.validate(arch)?;
        Self::from_store(arch.into(), config, ParamStore::new(seed, dtype), input_size)
    }

    /// Untrained generic CNN; only `base_channels` of `config` is used.
    pub fn baseline(config: ArchitectureConfig, seed: u64, input_size: (usize, usize)) -> Result<Self> {
        if config.base_channels == 0 {
            return Err(Error::Config("base_channels must be positive".into()));
        }
        Self::from_store(Backbone::Baseline, config, ParamStore::new(seed, DType::F32), input_size)
    }

    /// Rebuilds an encoder around stored parameters, which must be complete.
    pub fn from_params(
        backbone: Backbone,
        config: ArchitectureConfig,
        store: ParamStore,
        input_size: (usize, usize),
    ) -> Result<Self> {
        if store.is_empty() {
            return Err(Error::MissingBoundary);
        }
        Self::from_store(backbone, config, store, input_size)
    }

    fn from_store(
        backbone: Backbone,
        config: ArchitectureConfig,
        mut store: ParamStore,
        input_size: (usize, usize),
    ) -> Result<Self> {
        let before = store.len();
        let network = match backbone {
            Backbone::Inpainting(arch) => build_encoder(arch, &config, &mut store)?,
            Backbone::Baseline => baseline_network(&mut store, &config)?,
        };
        if before != 0 && before != store.len() {
            return Err(Error::MissingBoundary);
        }
        let probe = Tensor::zeros((1, 4, input_size.0, input_size.1), store.dtype(), store.device())?;
        let (_, c, h, w) = network.forward(&probe, false)?.dims4()?;
        Ok(Self { backbone, config, store, network, input_size, output_shape: (h, w, c) })
    }

    pub fn backbone(&self) -> Backbone {
        self.backbone
    }

    /// `None` for the baseline CNN.
    pub fn arch(&self) -> Option<Arch> {
        self.backbone.arch()
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn network(&self) -> &Sequential {
        &self.network
    }

    pub fn input_size(&self) -> (usize, usize) {
        self.input_size
    }

    pub fn output_shape(&self) -> (usize, usize, usize) {
        self.output_shape
    }

    pub fn embedding_len(&self) -> usize {
        self.output_shape.0 * self.output_shape.1 * self.output_shape.2
    }

    pub fn param_count(&self) -> usize {
        self.store.iter().filter(|(_, p)| p.trainable).map(|(_, p)| p.var.elem_count()).sum()
    }

    /// Independent copy with the same parameters.
    pub fn deep_copy(&self) -> Result<Self> {
        Self::from_store(self.backbone, self.config.clone(), self.store.deep_copy()?, self.input_size)
    }

    /// Feature maps `(B, C', H', W')` for a `(B, 4, H, W)` input.
    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let (_, c, h, w) = x.dims4()?;
        if c != 4 || (h, w) != self.input_size {
            return Err(Error::InputSize {
                expected: format!("4x{}x{}", self.input_size.0, self.input_size.1),
                got: format!("{c}x{h}x{w}"),
            });
        }
        self.network.forward(x, train)
    }

    /// `(B, 4, H, W)` tensor of images with an all-zero fourth channel.
    pub fn input_tensor(&self, images: &[&ImageTensor]) -> Result<Tensor> {
        for img in images {
            if (img.height(), img.width()) != self.input_size || img.channels() != 3 {
                return Err(Error::InputSize {
                    expected: format!("{}x{}x3", self.input_size.0, self.input_size.1),
                    got: format!("{}x{}x{}", img.height(), img.width(), img.channels()),
                });
            }
        }
        let x = images_to_tensor(images, self.store.dtype())?;
        let zero = x.narrow(1, 0, 1)?.zeros_like()?;
        Ok(Tensor::cat(&[&x, &zero], 1)?)
    }

    /// Flattened `(B, H'·W'·C')` embeddings, channel fastest.
    pub fn embed_tensor(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        flatten_hwc(&self.forward(x, train)?)
    }
}

/// `(B, C, H, W)` → `(B, H·W·C)` in row-major `H, W, C` order.
pub fn flatten_hwc(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    Ok(x.permute((0, 2, 3, 1))?.contiguous()?.reshape((b, h * w * c))?)
}

/// Inverse of [`flatten_hwc`].
pub fn unflatten_hwc(x: &Tensor, (h, w, c): (usize, usize, usize)) -> Result<Tensor> {
    let b = x.dims2()?.0;
    Ok(x.reshape((b, h, w, c))?.permute((0, 3, 1, 2))?.contiguous()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f32>,
    pub label: Option<usize>,
    pub source_id: String,
}

pub fn embed(encoder: &Encoder, image: &ImageTensor) -> Result<Vec<f32>> {
    let t = encoder.embed_tensor(&encoder.input_tensor(&[image])?, false)?;
    Ok(t.squeeze(0)?.to_dtype(DType::F32)?.to_vec1()?)
}

/// One row per sample, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: Array2<f32>,
    pub labels: Vec<Option<usize>>,
    pub source_ids: Vec<String>,
}

/// Samples per forward pass in [`embed_dataset`].
pub const EMBED_BATCH: usize = 16;

pub fn embed_dataset(encoder: &Encoder, samples: &[Sample]) -> Result<EmbeddingMatrix> {
    embed_dataset_batched(encoder, samples, EMBED_BATCH)
}

pub fn embed_dataset_batched(encoder: &Encoder, samples: &[Sample], batch: usize) -> Result<EmbeddingMatrix> {
    if samples.is_empty() {
        return Err(Error::Dataset("cannot embed an empty sample list".into()));
    }
    let d = encoder.embedding_len();
    let mut flat = Vec::with_capacity(samples.len() * d);
    for chunk in samples.chunks(batch.max(1)) {
        let images: Vec<&ImageTensor> = chunk.iter().map(|s| &s.image).collect();
        let rows = encoder
            .input_tensor(&images)
            .and_then(|x| encoder.embed_tensor(&x, false))
            .map_err(|e| Error::Dataset(format!("embedding `{}` failed: {e}", chunk[0].source_id)))?;
        flat.extend(rows.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?);
    }
    Ok(EmbeddingMatrix {
        rows: Array2::from_shape_vec((samples.len(), d), flat).expect("row count times width"),
        labels: samples.iter().map(|s| s.label).collect(),
        source_ids: samples.iter().map(|s| s.source_id.clone()).collect(),
    })
}

impl EmbeddingMatrix {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.rows.mapv(f64::from)
    }

    pub fn row(&self, i: usize) -> Embedding {
        Embedding {
            vector: self.rows.row(i).to_vec(),
            label: self.labels[i],
            source_id: self.source_ids[i].clone(),
        }
    }

    /// CSV with header `f0..f{D-1},label,source_id`; unlabeled rows leave the label empty.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim()).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        header.push("source_id".into());
        w.write_record(&header)?;
        for (i, row) in self.rows.outer_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].map(|l| l.to_string()).unwrap_or_default());
            rec.push(self.source_ids[i].clone());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("embedding csv", e))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let d = r.headers()?.len().checked_sub(2).ok_or_else(|| Error::Dataset("embedding csv without label columns".into()))?;
        let (mut flat, mut labels, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            for v in rec.iter().take(d) {
                flat.push(v.parse::<f32>().map_err(|_| Error::Dataset(format!("bad value `{v}` in {}", path.display())))?);
            }
            let label = &rec[d];
            labels.push(if label.is_empty() {
                None
            } else {
                Some(label.parse().map_err(|_| Error::Dataset(format!("bad label `{label}`")))?)
            });
            ids.push(rec[d + 1].to_string());
        }
        if ids.is_empty() {
            return Err(Error::Dataset(format!("{} has no rows", path.display())));
        }
        Ok(Self {
            rows: Array2::from_shape_vec((ids.len(), d), flat).map_err(|e| Error::Dataset(e.to_string()))?,
            labels,
            source_ids: ids,
        })
    }
}
