//! EdgeConnect: an edge generator hallucinates edges inside the hole, then an
//! image generator fills the hole conditioned on the completed edge map.

use candle_core::{Device, Tensor};

use super::ArchitectureConfig;
use crate::nn::ops::im2col_tensor;
use crate::nn::{conv, Activation, ConvBlock, ConvGeometry, Layer, PadMode, ParamStore, Sequential, Upsample2x};
use crate::Result;

/// Gradient-magnitude threshold used for edge targets.
pub const EDGE_THRESHOLD: f64 = 0.35;

fn reflect(kernel: usize, dilation: usize) -> ConvGeometry {
    ConvGeometry { kernel, stride: 1, padding: dilation * (kernel / 2), dilation, pad_mode: PadMode::Reflect }
}

/// `x + conv(conv(x))` with a dilated first convolution.
pub struct ResBlock {
    a: ConvBlock,
    b: ConvBlock,
}

impl ResBlock {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, dilation: usize) -> Result<Self> {
        Ok(Self {
            a: ConvBlock::new(store, &format!("{name}.a"), dim, dim, reflect(3, dilation), true, Activation::Relu)?,
            b: ConvBlock::new(store, &format!("{name}.b"), dim, dim, reflect(3, 1), true, Activation::Identity)?,
        })
    }
}

impl Layer for ResBlock {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let y = self.b.forward(&self.a.forward(x, train)?, train)?;
        Ok((x + y)?)
    }
}

pub(super) fn encoder(store: &mut ParamStore, cfg: &ArchitectureConfig) -> Result<Sequential> {
    let c = cfg.base_channels;
    let mut s = Sequential::new();
    s.push("enc.conv1", ConvBlock::new(store, "enc.conv1", 4, c, reflect(7, 1), true, Activation::Relu)?);
    s.push("enc.conv2", ConvBlock::new(store, "enc.conv2", c, 2 * c, conv(4, 2, 1), true, Activation::Relu)?);
    s.push("enc.conv3", ConvBlock::new(store, "enc.conv3", 2 * c, 3 * c, conv(4, 2, 1), true, Activation::Relu)?);
    Ok(s)
}

pub(super) fn body(store: &mut ParamStore, cfg: &ArchitectureConfig) -> Result<Sequential> {
    let c = cfg.base_channels;
    let mut s = Sequential::new();
    for i in 0..cfg.blocks(0) {
        let name = format!("gen.res{i}");
        s.push(name.clone(), ResBlock::new(store, &name, 3 * c, 2)?);
    }
    s.push("gen.up1.upsample", Upsample2x);
    s.push("gen.up1", ConvBlock::new(store, "gen.up1", 3 * c, 2 * c, conv(3, 1, 1), true, Activation::Relu)?);
    s.push("gen.up2.upsample", Upsample2x);
    s.push("gen.up2", ConvBlock::new(store, "gen.up2", 2 * c, c, conv(3, 1, 1), true, Activation::Relu)?);
    s.push("gen.out", ConvBlock::new(store, "gen.out", c, 3, reflect(7, 1), false, Activation::Sigmoid)?);
    Ok(s)
}

/// Maps (grey masked image, masked edges, mask) to an edge probability map.
pub(super) fn edge_generator(store: &mut ParamStore, cfg: &ArchitectureConfig) -> Result<Sequential> {
    let c = cfg.base_channels / 2;
    let mut s = Sequential::new();
    s.push("edge.conv1", ConvBlock::new(store, "edge.conv1", 3, c, reflect(7, 1), true, Activation::Relu)?);
    s.push("edge.conv2", ConvBlock::new(store, "edge.conv2", c, 2 * c, conv(4, 2, 1), true, Activation::Relu)?);
    for i in 0..cfg.blocks(1) {
        let name = format!("edge.res{i}");
        s.push(name.clone(), ResBlock::new(store, &name, 2 * c, 2)?);
    }
    s.push("edge.up.upsample", Upsample2x);
    s.push("edge.up", ConvBlock::new(store, "edge.up", 2 * c, c, conv(3, 1, 1), true, Activation::Relu)?);
    s.push("edge.out", ConvBlock::new(store, "edge.out", c, 1, reflect(7, 1), false, Activation::Sigmoid)?);
    Ok(s)
}

/// Mean over the RGB channels of `(B, 3, H, W)`.
pub fn grayscale(rgb: &Tensor) -> Result<Tensor> {
    Ok(rgb.mean_keepdim(1)?)
}

/// Binary edge map from thresholded Sobel gradient magnitude of `(B, 1, H, W)`.
pub fn sobel_edges(gray: &Tensor) -> Result<Tensor> {
    let (b, _, h, w) = gray.dims4()?;
    let g = ConvGeometry { kernel: 3, stride: 1, padding: 1, dilation: 1, pad_mode: PadMode::Reflect };
    let cols = im2col_tensor(&gray.detach(), g)?;
    let k = Tensor::from_vec(
        vec![-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0, -1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0],
        (1, 2, 9),
        &Device::Cpu,
    )?
    .to_dtype(gray.dtype())?
    .broadcast_as((b, 2, 9))?
    .contiguous()?;
    let grad = k.matmul(&cols)?;
    let mag = grad.sqr()?.sum_keepdim(1)?.sqrt()?;
    let edges = mag.ge(EDGE_THRESHOLD)?.to_dtype(gray.dtype())?;
    Ok(edges.reshape((b, 1, h, w))?)
}

/// Binary cross-entropy between predicted probabilities and targets.
pub fn edge_bce(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    let p = pred.clamp(1e-6, 1.0 - 1e-6)?;
    let one = p.ones_like()?;
    let pos = (target * p.log()?)?;
    let neg = ((&one - target)? * (&one - &p)?.log()?)?;
    Ok(((pos + neg)?.mean_all()? * -1.0)?)
}
