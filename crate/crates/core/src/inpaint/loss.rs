use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::discriminator::{hinge_generator_loss, PatchDiscriminator};
use super::perceptual::{perceptual_loss, style_loss, FeatureNet};
use super::LossWeights;
use crate::batch::{images_to_tensor, masks_to_tensor};
use crate::tensor::{ImageTensor, MaskTensor};
use crate::{Error, Result};

/// Unweighted loss components and their weighted sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l1: f64,
    pub adversarial: f64,
    pub perceptual: f64,
    pub feature_matching: f64,
    pub style: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn from_components(l1: f64, adversarial: f64, perceptual: f64, feature_matching: f64, style: f64, w: &LossWeights) -> Self {
        let total = w.l1 * l1
            + w.adversarial * adversarial
            + w.perceptual * perceptual
            + w.feature_matching * feature_matching
            + w.style * style;
        Self { l1, adversarial, perceptual, feature_matching, style, total }
    }

    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("l1", self.l1),
            ("adversarial", self.adversarial),
            ("perceptual", self.perceptual),
            ("feature_matching", self.feature_matching),
            ("style", self.style),
            ("total", self.total),
        ]
    }

    /// First component that is NaN or infinite.
    pub fn non_finite(&self) -> Option<&'static str> {
        self.named().into_iter().find(|(_, v)| !v.is_finite()).map(|(k, _)| k)
    }

    /// Weighted mean of several breakdowns.
    pub fn weighted_mean(parts: &[(LossBreakdown, f64)]) -> Self {
        let w: f64 = parts.iter().map(|(_, w)| w).sum();
        let mut out = Self::default();
        for (b, pw) in parts {
            let s = pw / w;
            out.l1 += b.l1 * s;
            out.adversarial += b.adversarial * s;
            out.perceptual += b.perceptual * s;
            out.feature_matching += b.feature_matching * s;
            out.style += b.style * s;
            out.total += b.total * s;
        }
        out
    }
}

/// Differentiable total plus the host-side breakdown.
pub struct GeneratorLoss {
    pub total: Tensor,
    pub breakdown: LossBreakdown,
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
}

/// Generator loss on a composited prediction. The feature-matching term is
/// evaluated only when its weight is positive and is reported as 0 otherwise.
pub fn generator_loss_tensor(
    pred: &Tensor,
    target: &Tensor,
    discriminator: &PatchDiscriminator,
    features: &FeatureNet,
    weights: &LossWeights,
) -> Result<GeneratorLoss> {
    let l1 = (pred - target)?.abs()?.mean_all()?;
    let fake = discriminator.forward(pred)?;
    let adversarial = hinge_generator_loss(&fake.scores)?;
    let fp = features.features(pred)?;
    let ft = features.features(target)?;
    let perceptual = perceptual_loss(&fp, &ft)?;
    let style = style_loss(&fp, &ft)?;
    let fm = if weights.feature_matching > 0.0 {
        let real = discriminator.forward(&target.detach())?;
        let mut acc = l1.zeros_like()?;
        for (f, r) in fake.features.iter().zip(&real.features) {
            acc = (acc + (f - r.detach())?.abs()?.mean_all()?)?;
        }
        Some(acc)
    } else {
        None
    };

    let mut total = (&l1 * weights.l1)?;
    total = (total + (&adversarial * weights.adversarial)?)?;
    total = (total + (&perceptual * weights.perceptual)?)?;
    total = (total + (&style * weights.style)?)?;
    if let Some(fm) = &fm {
        total = (total + (fm * weights.feature_matching)?)?;
    }
    let breakdown = LossBreakdown::from_components(
        scalar(&l1)?,
        scalar(&adversarial)?,
        scalar(&perceptual)?,
        fm.as_ref().map(scalar).transpose()?.unwrap_or(0.0),
        scalar(&style)?,
        weights,
    );
    Ok(GeneratorLoss { total, breakdown })
}

/// Host-image form of [`generator_loss_tensor`]. `pred` is the composited
/// output; the mask only has to agree in shape.
pub fn generator_loss(
    pred: &ImageTensor,
    target: &ImageTensor,
    mask: &MaskTensor,
    discriminator: &PatchDiscriminator,
    features: &FeatureNet,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    if pred.shape() != target.shape() || (pred.height(), pred.width()) != mask.shape() {
        return Err(Error::ShapeMismatch {
            left: format!("pred {:?}", pred.shape()),
            right: format!("target {:?}, mask {:?}", target.shape(), mask.shape()),
        });
    }
    masks_to_tensor(&[mask], candle_core::DType::F32)?;
    let p = images_to_tensor(&[pred], candle_core::DType::F32)?;
    let t = images_to_tensor(&[target], candle_core::DType::F32)?;
    let out = generator_loss_tensor(&p, &t, discriminator, features, weights)?.breakdown;
    if let Some(component) = out.non_finite() {
        return Err(Error::Diverged { component: component.to_string(), iteration: 0 });
    }
    Ok(out)
}
