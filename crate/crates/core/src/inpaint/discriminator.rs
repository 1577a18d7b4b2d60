use candle_core::Tensor;

use crate::nn::{conv, Activation, Conv2d, ConvBlock, Layer, ParamStore};
use crate::Result;

/// Patch discriminator shared by all four generators. Returns one score map
/// plus the intermediate activations used for feature matching.
pub struct PatchDiscriminator {
    blocks: Vec<ConvBlock>,
    head: Conv2d,
}

pub struct DiscriminatorOutput {
    pub scores: Tensor,
    pub features: Vec<Tensor>,
}

impl PatchDiscriminator {
    pub fn new(store: &mut ParamStore, base_channels: usize) -> Result<Self> {
        let c = base_channels;
        let specs = [(3, c, 2), (c, 2 * c, 2), (2 * c, 4 * c, 1)];
        let blocks = specs
            .iter()
            .enumerate()
            .map(|(i, &(cin, cout, stride))| {
                let g = if stride == 2 { conv(4, 2, 1) } else { conv(3, 1, 1) };
                ConvBlock::new(store, &format!("disc.conv{}", i + 1), cin, cout, g, false, Activation::LeakyRelu)
            })
            .collect::<Result<Vec<_>>>()?;
        let head = Conv2d::new(store, "disc.head", 4 * c, 1, conv(3, 1, 1), true)?;
        Ok(Self { blocks, head })
    }

    pub fn forward(&self, image: &Tensor) -> Result<DiscriminatorOutput> {
        let mut x = image.clone();
        let mut features = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            x = b.forward(&x, true)?;
            features.push(x.clone());
        }
        let scores = self.head.forward(&x, true)?;
        Ok(DiscriminatorOutput { scores, features })
    }
}

/// Hinge loss for the discriminator: mean relu(1 − D(real)) + mean relu(1 + D(fake)).
pub fn hinge_discriminator_loss(real: &Tensor, fake: &Tensor) -> Result<Tensor> {
    let r = (real.ones_like()? - real)?.relu()?.mean_all()?;
    let f = (fake.ones_like()? + fake)?.relu()?.mean_all()?;
    Ok((r + f)?)
}

/// Hinge loss for the generator: −mean D(fake).
pub fn hinge_generator_loss(fake: &Tensor) -> Result<Tensor> {
    Ok((fake.mean_all()? * -1.0)?)
}
