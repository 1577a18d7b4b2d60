//! DeepFillV2 coarse network built from gated convolutions.

use candle_core::Tensor;

use super::ArchitectureConfig;
use crate::nn::{conv, Activation, Conv2d, ConvBlock, ConvGeometry, Layer, PadMode, ParamStore, Sequential, Upsample2x};
use crate::Result;

/// `act(features) · sigmoid(gate)`, both halves from one convolution.
pub struct GatedConv {
    conv: Conv2d,
    out: usize,
    act: Activation,
}

impl GatedConv {
    pub fn new(store: &mut ParamStore, name: &str, cin: usize, cout: usize, geometry: ConvGeometry) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(store, &format!("{name}.conv"), cin, 2 * cout, geometry, true)?,
            out: cout,
            act: Activation::Elu,
        })
    }
}

impl Layer for GatedConv {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let y = self.conv.forward(x, train)?;
        let feat = self.act.apply(&y.narrow(1, 0, self.out)?)?;
        let gate = candle_nn::ops::sigmoid(&y.narrow(1, self.out, self.out)?)?;
        Ok((feat * gate)?)
    }
}

fn dilated(d: usize) -> ConvGeometry {
    ConvGeometry { kernel: 3, stride: 1, padding: d, dilation: d, pad_mode: PadMode::Zero }
}

pub(super) fn encoder(store: &mut ParamStore, cfg: &ArchitectureConfig) -> Result<Sequential> {
    let c = cfg.base_channels;
    let layers = [
        (4, c / 2, conv(5, 1, 2)),
        (c / 2, c, conv(3, 2, 1)),
        (c, c, conv(3, 1, 1)),
        (c, 2 * c, conv(3, 2, 1)),
        (2 * c, 2 * c, conv(3, 1, 1)),
    ];
    let mut s = Sequential::new();
    for (i, (cin, cout, g)) in layers.into_iter().enumerate() {
        let name = format!("enc.gconv{}", i + 1);
        s.push(name.clone(), GatedConv::new(store, &name, cin, cout, g)?);
    }
    Ok(s)
}

pub(super) fn body(store: &mut ParamStore, cfg: &ArchitectureConfig) -> Result<Sequential> {
    let c = cfg.base_channels;
    let mut s = Sequential::new();
    for &r in &cfg.dilation_rates {
        let name = format!("gen.dil{r}");
        s.push(name.clone(), GatedConv::new(store, &name, 2 * c, 2 * c, dilated(r))?);
    }
    for i in 0..cfg.blocks(0) {
        let name = format!("gen.conv{i}");
        s.push(name.clone(), GatedConv::new(store, &name, 2 * c, 2 * c, conv(3, 1, 1))?);
    }
    s.push("gen.up1.upsample", Upsample2x);
    s.push("gen.up1", GatedConv::new(store, "gen.up1", 2 * c, c, conv(3, 1, 1))?);
    s.push("gen.mid", GatedConv::new(store, "gen.mid", c, c / 2, conv(3, 1, 1))?);
    s.push("gen.up2.upsample", Upsample2x);
    s.push("gen.up2", GatedConv::new(store, "gen.up2", c / 2, c / 4, conv(3, 1, 1))?);
    s.push("gen.out", ConvBlock::new(store, "gen.out", c / 4, 3, conv(3, 1, 1), false, Activation::Sigmoid)?);
    Ok(s)
}
