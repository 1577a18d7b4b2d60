//! The four inpainting generator families, their shared patch discriminator,
//! the composite generator loss and adversarial training.
//!
//! Every generator is an encoder (parameters under `enc.`) followed by a body
//! (`gen.`); the split point is the boundary that [`crate::encoder`] isolates.

pub mod aotgan;
mod config;
pub mod deepfill;
pub mod discriminator;
pub mod edgeconnect;
pub mod lama;
pub mod loss;
pub mod perceptual;
pub mod train;

use std::collections::BTreeMap;
use std::path::Path;

use candle_core::{DType, Tensor};

pub use config::{Arch, ArchitectureConfig, LossWeights};
pub use discriminator::{DiscriminatorOutput, PatchDiscriminator};
pub use loss::{generator_loss, LossBreakdown};
pub use train::{train_inpainting, BestCheckpoint, LogRecord, Split, TrainingLog, TrainingSchedule};

use crate::batch::{images_to_tensor, masked_input, masks_to_tensor, tensor_to_images};
use crate::nn::save_stores;
use crate::nn::{Layer, ParamStore, Sequential};
use crate::tensor::{composite, ImageTensor, MaskTensor};
use crate::{Error, Result};

/// Name prefix shared by all encoder parameters and layers.
pub const ENCODER_PREFIX: &str = "enc.";
const DISC_PREFIX: &str = "disc.";
const CHECKPOINT_FORMAT: &str = "patreid-inpaint-1";

pub struct InpaintingModel {
    arch: Arch,
    config: ArchitectureConfig,
    generator: ParamStore,
    discriminator_params: ParamStore,
    encoder: Sequential,
    body: Sequential,
    edge: Option<Sequential>,
    discriminator: PatchDiscriminator,
}

/// Intermediate tensors of one generator pass.
pub struct ForwardTrace {
    /// What the encoder consumed; differs from the model input only for EdgeConnect.
    pub encoder_input: Tensor,
    /// Activations at the encoder/body boundary.
    pub boundary: Tensor,
    /// Generator output before compositing, `(B, 3, H, W)` in [0, 1].
    pub raw: Tensor,
    /// EdgeConnect edge probabilities.
    pub edge_pred: Option<Tensor>,
}

/// Iteration and validation loss stored with a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointInfo {
    pub iteration: usize,
    pub val_loss: f64,
}

pub fn build_model(arch: Arch, config: &ArchitectureConfig, seed: u64) -> Result<InpaintingModel> {
    InpaintingModel::new(arch, config.clone(), seed, DType::F32)
}

fn build_networks(
    arch: Arch,
    config: &ArchitectureConfig,
    store: &mut ParamStore,
) -> Result<(Sequential, Sequential, Option<Sequential>)> {
    Ok(match arch {
        Arch::AotGan => (build_encoder(arch, config, store)?, aotgan::body(store, config)?, None),
        Arch::DeepFillV2 => (build_encoder(arch, config, store)?, deepfill::body(store, config)?, None),
        Arch::EdgeConnect => {
            let edge = if config.edge_stage { Some(edgeconnect::edge_generator(store, config)?) } else { None };
            (build_encoder(arch, config, store)?, edgeconnect::body(store, config)?, edge)
        }
        Arch::Lama => (build_encoder(arch, config, store)?, lama::body(store, config)?, None),
    })
}

/// Builds only the encoder of `arch`, reusing parameters already in `store`.
pub(crate) fn build_encoder(arch: Arch, config: &ArchitectureConfig, store: &mut ParamStore) -> Result<Sequential> {
    match arch {
        Arch::AotGan => aotgan::encoder(store, config),
        Arch::DeepFillV2 => deepfill::encoder(store, config),
        Arch::EdgeConnect => edgeconnect::encoder(store, config),
        Arch::Lama => lama::encoder(store, config),
    }
}

fn disc_seed(seed: u64) -> u64 {
    seed ^ 0xd15c_0000_0000_0001
}

impl InpaintingModel {
    pub fn new(arch: Arch, config: ArchitectureConfig, seed: u64, dtype: DType) -> Result<Self> {
        let generator = ParamStore::new(seed, dtype);
        let discriminator_params = ParamStore::new(disc_seed(seed), dtype);
        Self::assemble(arch, config, generator, discriminator_params, false)
    }

    /// Rebuilds the networks around existing parameter stores, which must hold
    /// exactly the parameters the architecture needs.
    pub fn from_stores(
        arch: Arch,
        config: ArchitectureConfig,
        generator: ParamStore,
        discriminator_params: ParamStore,
    ) -> Result<Self> {
        Self::assemble(arch, config, generator, discriminator_params, true)
    }

    fn assemble(
        arch: Arch,
        config: ArchitectureConfig,
        mut generator: ParamStore,
        mut discriminator_params: ParamStore,
        existing: bool,
    ) -> Result<Self> {
        config.validate(arch)?;
        let before = (generator.len(), discriminator_params.len());
        let (encoder, body, edge) = build_networks(arch, &config, &mut generator)?;
        let discriminator = PatchDiscriminator::new(&mut discriminator_params, config.base_channels)?;
        if existing && before != (generator.len(), discriminator_params.len()) {
            return Err(Error::Checkpoint(format!(
                "parameter set does not match a {arch} model with this configuration ({} + {} stored, {} + {} expected)",
                before.0,
                before.1,
                generator.len(),
                discriminator_params.len()
            )));
        }
        Ok(Self { arch, config, generator, discriminator_params, encoder, body, edge, discriminator })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn dtype(&self) -> DType {
        self.generator.dtype()
    }

    pub fn generator_params(&self) -> &ParamStore {
        &self.generator
    }

    pub fn discriminator_params(&self) -> &ParamStore {
        &self.discriminator_params
    }

    pub fn discriminator(&self) -> &PatchDiscriminator {
        &self.discriminator
    }

    pub fn encoder_network(&self) -> &Sequential {
        &self.encoder
    }

    /// Layer names of the encoder, input to output.
    pub fn encoder_layers(&self) -> &[String] {
        self.encoder.names()
    }

    /// Trainable scalars in the generator (edge stage included).
    pub fn generator_param_count(&self) -> usize {
        trainable_count(&self.generator, "")
    }

    pub fn encoder_param_count(&self) -> usize {
        trainable_count(&self.generator, ENCODER_PREFIX)
    }

    /// Applies the EdgeConnect edge stage, if any, to a `(B, 4, H, W)` input.
    fn prepare(&self, input: &Tensor, train: bool) -> Result<(Tensor, Option<Tensor>)> {
        let (_, c, _, _) = input.dims4()?;
        if c != 4 {
            return Err(Error::InputSize { expected: "4 input channels (RGB + mask)".into(), got: format!("{c} channels") });
        }
        if self.arch != Arch::EdgeConnect {
            return Ok((input.clone(), None));
        }
        let masked = input.narrow(1, 0, 3)?;
        let mask = input.narrow(1, 3, 1)?;
        let keep = (mask.ones_like()? - &mask)?;
        let gray = edgeconnect::grayscale(&masked)?;
        let known_edges = (edgeconnect::sobel_edges(&gray)? * &keep)?;
        let (edges, pred) = match &self.edge {
            Some(edge) => {
                let pred = edge.forward(&Tensor::cat(&[&gray, &known_edges, &mask], 1)?, train)?;
                ((&known_edges + (pred.detach() * &mask)?)?, Some(pred))
            }
            None => (known_edges, None),
        };
        Ok((Tensor::cat(&[&masked, &edges], 1)?, pred))
    }

    pub fn forward(&self, input: &Tensor, train: bool) -> Result<ForwardTrace> {
        let (encoder_input, edge_pred) = self.prepare(input, train)?;
        let boundary = self.encoder.forward(&encoder_input, train)?;
        let raw = self.body.forward(&boundary, train)?;
        Ok(ForwardTrace { encoder_input, boundary, raw, edge_pred })
    }

    /// Composited outputs for a batch of images and masks.
    pub fn inpaint_batch(&self, images: &[&ImageTensor], masks: &[&MaskTensor]) -> Result<Vec<ImageTensor>> {
        if images.len() != masks.len() {
            return Err(Error::ShapeMismatch {
                left: format!("{} images", images.len()),
                right: format!("{} masks", masks.len()),
            });
        }
        for img in images {
            if img.channels() != 3 {
                return Err(Error::InputSize { expected: "3-channel image".into(), got: format!("{} channels", img.channels()) });
            }
        }
        let x = images_to_tensor(images, self.dtype())?;
        let m = masks_to_tensor(masks, self.dtype())?;
        let raw = tensor_to_images(&self.forward(&masked_input(&x, &m)?, false)?.raw)?;
        images
            .iter()
            .zip(masks)
            .zip(&raw)
            .map(|((img, mask), gen)| composite(img, gen, mask))
            .collect()
    }

    fn snapshot(&self) -> Result<(BTreeMap<String, Tensor>, BTreeMap<String, Tensor>)> {
        Ok((self.generator.snapshot()?, self.discriminator_params.snapshot()?))
    }

    fn restore(&self, snap: &(BTreeMap<String, Tensor>, BTreeMap<String, Tensor>)) -> Result<()> {
        self.generator.restore(&snap.0)?;
        self.discriminator_params.restore(&snap.1)
    }

    /// Writes generator and discriminator parameters with the architecture,
    /// its configuration (JSON), iteration and validation loss in the header.
    pub fn save_checkpoint(&self, path: &Path, info: CheckpointInfo) -> Result<()> {
        let meta = BTreeMap::from([
            ("format".to_string(), CHECKPOINT_FORMAT.to_string()),
            ("arch".to_string(), self.arch.name().to_string()),
            ("config".to_string(), serde_json::to_string(&self.config)?),
            ("iteration".to_string(), info.iteration.to_string()),
            ("val_loss".to_string(), format!("{:e}", info.val_loss)),
        ]);
        save_stores(&[&self.generator, &self.discriminator_params], path, &meta)
    }

    pub fn load_checkpoint(path: &Path) -> Result<(Self, CheckpointInfo)> {
        Self::load_checkpoint_as(path, DType::F32)
    }

    pub fn load_checkpoint_as(path: &Path, dtype: DType) -> Result<(Self, CheckpointInfo)> {
        let (mut generator, meta) = ParamStore::load(path, 0, dtype)?;
        let field = |k: &str| {
            meta.get(k)
                .ok_or_else(|| Error::Checkpoint(format!("{} has no `{k}` entry", path.display())))
        };
        if field("format")? != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("{} is not an inpainting checkpoint", path.display())));
        }
        let arch: Arch = field("arch")?.parse()?;
        let config: ArchitectureConfig = serde_json::from_str(field("config")?)?;
        let parse_err = |k: &str| Error::Checkpoint(format!("malformed `{k}` in {}", path.display()));
        let info = CheckpointInfo {
            iteration: field("iteration")?.parse().map_err(|_| parse_err("iteration"))?,
            val_loss: field("val_loss")?.parse().map_err(|_| parse_err("val_loss"))?,
        };
        let discriminator_params = generator.take_prefix(DISC_PREFIX);
        Ok((Self::from_stores(arch, config, generator, discriminator_params)?, info))
    }
}

fn trainable_count(store: &ParamStore, prefix: &str) -> usize {
    store
        .iter()
        .filter(|(k, p)| p.trainable && k.starts_with(prefix))
        .map(|(_, p)| p.var.elem_count())
        .sum()
}

/// `f((I ⊙ (1 − M)) ⊕ M)` composited with the original outside `M`.
pub fn forward_inpaint(model: &InpaintingModel, image: &ImageTensor, mask: &MaskTensor) -> Result<ImageTensor> {
    if image.height() != mask.height() || image.width() != mask.width() {
        return Err(Error::ShapeMismatch {
            left: format!("image {}x{}", image.height(), image.width()),
            right: format!("mask {}x{}", mask.height(), mask.width()),
        });
    }
    Ok(model.inpaint_batch(&[image], &[mask])?.remove(0))
}
