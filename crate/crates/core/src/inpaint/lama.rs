//! LaMa: strided conv encoder ending in a split local/global block, fast
//! Fourier convolution residual bottleneck, upsampling decoder.
//!
//! Feature maps inside the FFC layers carry the local channels first and the
//! global channels after them in one tensor.

use candle_core::Tensor;

use super::ArchitectureConfig;
use crate::nn::spectral::SpectralTransform;
use crate::nn::{conv, Activation, BatchNorm2d, Conv2d, ConvBlock, ConvGeometry, Layer, PadMode, ParamStore, Sequential, Upsample2x};
use crate::Result;

/// Share of channels in the global path.
const GLOBAL_RATIO: f64 = 0.75;

fn reflect(kernel: usize, stride: usize) -> ConvGeometry {
    ConvGeometry { kernel, stride, padding: kernel / 2, dilation: 1, pad_mode: PadMode::Reflect }
}

fn split(channels: usize) -> (usize, usize) {
    let global = (channels as f64 * GLOBAL_RATIO).round() as usize;
    (channels - global, global)
}

/// Global-to-global transform: spectral, or a plain conv when disabled.
enum GlobalPath {
    Spectral(SpectralTransform),
    Conv(Conv2d),
}

impl GlobalPath {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        match self {
            GlobalPath::Spectral(s) => s.forward(x, train),
            GlobalPath::Conv(c) => c.forward(x, train),
        }
    }
}

/// One fast Fourier convolution with batch norm and ReLU on each output path.
pub struct Ffc {
    in_local: usize,
    in_global: usize,
    l2l: Conv2d,
    l2g: Conv2d,
    g2l: Option<Conv2d>,
    g2g: Option<GlobalPath>,
    bn_local: BatchNorm2d,
    bn_global: BatchNorm2d,
}

impl Ffc {
    /// `in_global = 0` gives the entry block where both paths read local features.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        (in_local, in_global): (usize, usize),
        (out_local, out_global): (usize, usize),
        stride: usize,
        spectral: bool,
    ) -> Result<Self> {
        let g = reflect(3, stride);
        let (g2l, g2g) = if in_global > 0 {
            let g2g = if spectral {
                GlobalPath::Spectral(SpectralTransform::new(store, &format!("{name}.g2g"), in_global, out_global, stride == 2)?)
            } else {
                GlobalPath::Conv(Conv2d::new(store, &format!("{name}.g2g"), in_global, out_global, g, false)?)
            };
            (Some(Conv2d::new(store, &format!("{name}.g2l"), in_global, out_local, g, false)?), Some(g2g))
        } else {
            (None, None)
        };
        Ok(Self {
            in_local,
            in_global,
            l2l: Conv2d::new(store, &format!("{name}.l2l"), in_local, out_local, g, false)?,
            l2g: Conv2d::new(store, &format!("{name}.l2g"), in_local, out_global, g, false)?,
            g2l,
            g2g,
            bn_local: BatchNorm2d::new(store, &format!("{name}.bn_l"), out_local)?,
            bn_global: BatchNorm2d::new(store, &format!("{name}.bn_g"), out_global)?,
        })
    }
}

impl Layer for Ffc {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let xl = x.narrow(1, 0, self.in_local)?;
        let mut local = self.l2l.forward(&xl, train)?;
        let mut global = self.l2g.forward(&xl, train)?;
        if let (Some(g2l), Some(g2g)) = (&self.g2l, &self.g2g) {
            let xg = x.narrow(1, self.in_local, self.in_global)?;
            local = (local + g2l.forward(&xg, train)?)?;
            global = (global + g2g.forward(&xg, train)?)?;
        }
        let local = self.bn_local.forward(&local, train)?.relu()?;
        let global = self.bn_global.forward(&global, train)?.relu()?;
        Ok(Tensor::cat(&[local, global], 1)?)
    }
}

/// Two FFC layers with an identity shortcut on both paths.
pub struct FfcResBlock {
    a: Ffc,
    b: Ffc,
}

impl FfcResBlock {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, spectral: bool) -> Result<Self> {
        let s = split(dim);
        Ok(Self {
            a: Ffc::new(store, &format!("{name}.a"), s, s, 1, spectral)?,
            b: Ffc::new(store, &format!("{name}.b"), s, s, 1, spectral)?,
        })
    }
}

impl Layer for FfcResBlock {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let y = self.b.forward(&self.a.forward(x, train)?, train)?;
        Ok((x + y)?)
    }
}

pub(super) fn encoder(store: &mut ParamStore, cfg: &ArchitectureConfig) -> Result<Sequential> {
    let c = cfg.base_channels;
    let mut s = Sequential::new();
    s.push("enc.conv1", ConvBlock::new(store, "enc.conv1", 4, c, reflect(7, 1), true, Activation::Relu)?);
    s.push("enc.down1", ConvBlock::new(store, "enc.down1", c, 2 * c, conv(3, 2, 1), true, Activation::Relu)?);
    s.push("enc.down2", ConvBlock::new(store, "enc.down2", 2 * c, 4 * c, conv(3, 2, 1), true, Activation::Relu)?);
    s.push("enc.ffc", Ffc::new(store, "enc.ffc", (4 * c, 0), split(4 * c), 2, cfg.spectral_branch)?);
    Ok(s)
}

pub(super) fn body(store: &mut ParamStore, cfg: &ArchitectureConfig) -> Result<Sequential> {
    let c = cfg.base_channels;
    let mut s = Sequential::new();
    for i in 0..cfg.blocks(0) {
        let name = format!("gen.ffc{i}");
        s.push(name.clone(), FfcResBlock::new(store, &name, 4 * c, cfg.spectral_branch)?);
    }
    for (i, (cin, cout)) in [(4 * c, 2 * c), (2 * c, c), (c, c)].into_iter().enumerate() {
        let name = format!("gen.up{}", i + 1);
        s.push(format!("{name}.upsample"), Upsample2x);
        s.push(name.clone(), ConvBlock::new(store, &name, cin, cout, conv(3, 1, 1), true, Activation::Relu)?);
    }
    s.push("gen.out", ConvBlock::new(store, "gen.out", c, 3, reflect(7, 1), false, Activation::Sigmoid)?);
    Ok(s)
}
