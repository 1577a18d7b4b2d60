//! AOT-GAN: three-conv encoder, aggregated contextual-transformation blocks,
//! upsampling decoder.

use candle_core::{Tensor, D};

use super::ArchitectureConfig;
use crate::nn::{conv, Activation, Conv2d, ConvBlock, ConvGeometry, Layer, PadMode, ParamStore, Sequential, Upsample2x};
use crate::Result;

fn reflect(kernel: usize, dilation: usize) -> ConvGeometry {
    ConvGeometry { kernel, stride: 1, padding: dilation * (kernel / 2), dilation, pad_mode: PadMode::Reflect }
}

pub(super) fn encoder(store: &mut ParamStore, cfg: &ArchitectureConfig) -> Result<Sequential> {
    let c = cfg.base_channels;
    let mut s = Sequential::new();
    s.push("enc.conv1", ConvBlock::new(store, "enc.conv1", 4, c, reflect(7, 1), false, Activation::Relu)?);
    s.push("enc.conv2", ConvBlock::new(store, "enc.conv2", c, 2 * c, conv(4, 2, 1), false, Activation::Relu)?);
    s.push("enc.conv3", ConvBlock::new(store, "enc.conv3", 2 * c, 4 * c, conv(4, 2, 1), false, Activation::Relu)?);
    Ok(s)
}

pub(super) fn body(store: &mut ParamStore, cfg: &ArchitectureConfig) -> Result<Sequential> {
    let c = cfg.base_channels;
    let mut s = Sequential::new();
    for i in 0..cfg.blocks(0) {
        let name = format!("gen.aot{i}");
        s.push(name.clone(), AotBlock::new(store, &name, 4 * c, &cfg.dilation_rates)?);
    }
    s.push("gen.up1.upsample", Upsample2x);
    s.push("gen.up1", ConvBlock::new(store, "gen.up1", 4 * c, 2 * c, conv(3, 1, 1), false, Activation::Relu)?);
    s.push("gen.up2.upsample", Upsample2x);
    s.push("gen.up2", ConvBlock::new(store, "gen.up2", 2 * c, c, conv(3, 1, 1), false, Activation::Relu)?);
    s.push("gen.out", ConvBlock::new(store, "gen.out", c, 3, conv(3, 1, 1), false, Activation::Sigmoid)?);
    Ok(s)
}

/// Split-transform-merge over several dilations with a learned spatial gate
/// between the block input and the aggregated features.
pub struct AotBlock {
    branches: Vec<Conv2d>,
    fuse: Conv2d,
    gate: Conv2d,
}

impl AotBlock {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, rates: &[usize]) -> Result<Self> {
        let part = dim / rates.len();
        let branches = rates
            .iter()
            .map(|&r| Conv2d::new(store, &format!("{name}.rate{r}"), dim, part, reflect(3, r), true))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            branches,
            fuse: Conv2d::new(store, &format!("{name}.fuse"), part * rates.len(), dim, reflect(3, 1), true)?,
            gate: Conv2d::new(store, &format!("{name}.gate"), dim, dim, reflect(3, 1), true)?,
        })
    }
}

/// Per-channel spatial standardisation rescaled to roughly [-10, 0].
fn gate_norm(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let flat = x.reshape((b, c, h * w))?;
    let mean = flat.mean_keepdim(D::Minus1)?;
    let centered = flat.broadcast_sub(&mean)?;
    let n = (h * w) as f64;
    let std = (centered.sqr()?.sum_keepdim(D::Minus1)? / (n - 1.0).max(1.0))?.sqrt()?;
    let z = centered.broadcast_div(&(std + 1e-9)?)?;
    Ok((((z * 2.0)? - 1.0)? * 5.0)?.reshape((b, c, h, w))?)
}

impl Layer for AotBlock {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let outs = self
            .branches
            .iter()
            .map(|b| Ok(b.forward(x, train)?.relu()?))
            .collect::<Result<Vec<_>>>()?;
        let fused = self.fuse.forward(&Tensor::cat(&outs, 1)?, train)?;
        let mask = candle_nn::ops::sigmoid(&gate_norm(&self.gate.forward(x, train)?)?)?;
        let keep = (mask.ones_like()? - &mask)?;
        Ok(((x * keep)? + (fused * mask)?)?)
    }
}
