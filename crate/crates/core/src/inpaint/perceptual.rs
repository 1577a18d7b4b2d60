use candle_core::{DType, Tensor};

use crate::nn::{conv, Activation, AvgPool2, ConvBlock, Layer, ParamStore};
use crate::Result;

/// Fixed, randomly initialised conv net used as the feature space for the
/// perceptual and style losses. Its parameters never receive updates.
pub struct FeatureNet {
    _store: ParamStore,
    blocks: Vec<ConvBlock>,
}

impl FeatureNet {
    pub fn new(seed: u64, dtype: DType) -> Result<Self> {
        let mut store = ParamStore::new(seed, dtype);
        let widths = [(3, 8), (8, 16), (16, 16)];
        let blocks = widths
            .iter()
            .enumerate()
            .map(|(i, &(cin, cout))| {
                ConvBlock::new(&mut store, &format!("feat.conv{i}"), cin, cout, conv(3, 1, 1), false, Activation::Relu)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { _store: store, blocks })
    }

    pub fn features(&self, image: &Tensor) -> Result<Vec<Tensor>> {
        let mut x = image.clone();
        let mut out = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                x = AvgPool2.forward(&x, false)?;
            }
            x = b.forward(&x, false)?;
            out.push(x.clone());
        }
        Ok(out)
    }
}

/// `F Fᵀ / (C·H·W)` per sample, `(B, C, C)`.
pub fn gram(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let f = x.reshape((b, c, h * w))?;
    Ok((f.matmul(&f.t()?)? / (c * h * w) as f64)?)
}

/// Mean absolute feature difference, summed over layers.
pub fn perceptual_loss(pred: &[Tensor], target: &[Tensor]) -> Result<Tensor> {
    let mut total = pred[0].zeros_like()?.sum_all()?;
    for (p, t) in pred.iter().zip(target) {
        total = (total + (p - t.detach())?.abs()?.mean_all()?)?;
    }
    Ok(total)
}

/// Mean absolute Gram-matrix difference, summed over layers.
pub fn style_loss(pred: &[Tensor], target: &[Tensor]) -> Result<Tensor> {
    let mut total = pred[0].zeros_like()?.sum_all()?;
    for (p, t) in pred.iter().zip(target) {
        total = (total + (gram(p)? - gram(&t.detach())?)?.abs()?.mean_all()?)?;
    }
    Ok(total)
}
