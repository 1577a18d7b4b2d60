use candle_core::{Tensor, Var, D};

use super::ops::{avg_pool2, im2col_tensor, upsample_nearest2x, ConvGeometry, PadMode};
use super::params::ParamStore;
use crate::{Error, Result};

/// A network stage. `train` selects batch statistics in normalisation layers.
pub trait Layer: Send + Sync {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
    Elu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: &Tensor) -> Result<Tensor> {
        Ok(match self {
            Activation::Identity => x.clone(),
            Activation::Relu => x.relu()?,
            Activation::LeakyRelu => x.maximum(&(x * 0.2)?)?,
            Activation::Elu => x.elu(1.0)?,
            Activation::Sigmoid => candle_nn::ops::sigmoid(x)?,
            Activation::Tanh => x.tanh()?,
        })
    }
}

impl Layer for Activation {
    fn forward(&self, x: &Tensor, _train: bool) -> Result<Tensor> {
        self.apply(x)
    }
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    weight: Tensor,
    bias: Option<Tensor>,
    geometry: ConvGeometry,
    out_channels: usize,
}

impl Conv2d {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        geometry: ConvGeometry,
        bias: bool,
    ) -> Result<Self> {
        let k = geometry.kernel;
        let fan_in = in_channels * k * k;
        let weight = store.kaiming(&format!("{name}.weight"), &[out_channels, in_channels, k, k], fan_in)?;
        let bias = if bias {
            Some(store.constant(&format!("{name}.bias"), &[out_channels], 0.0)?)
        } else {
            None
        };
        Ok(Self { weight, bias, geometry, out_channels })
    }

    /// `k×k` convolution with "same" zero padding and stride 1.
    pub fn same(store: &mut ParamStore, name: &str, cin: usize, cout: usize, k: usize) -> Result<Self> {
        Self::new(store, name, cin, cout, conv(k, 1, k / 2), true)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn geometry(&self) -> ConvGeometry {
        self.geometry
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }
}

/// Zero-padded geometry without dilation.
pub fn conv(kernel: usize, stride: usize, padding: usize) -> ConvGeometry {
    ConvGeometry { kernel, stride, padding, dilation: 1, pad_mode: PadMode::Zero }
}

impl Layer for Conv2d {
    fn forward(&self, x: &Tensor, _train: bool) -> Result<Tensor> {
        let (b, c, h, w) = x.dims4()?;
        let g = self.geometry;
        let (ho, wo) = (g.output_len(h)?, g.output_len(w)?);
        let ckk = c * g.kernel * g.kernel;
        let cols = if g.kernel == 1 && g.stride == 1 && g.padding == 0 {
            x.reshape((b, c, h * w))?
        } else {
            im2col_tensor(x, g)?
        };
        let wm = self
            .weight
            .reshape((1, self.out_channels, ckk))?
            .broadcast_as((b, self.out_channels, ckk))?
            .contiguous()?;
        let mut y = wm.matmul(&cols)?;
        if let Some(bias) = &self.bias {
            y = y.broadcast_add(&bias.reshape((1, self.out_channels, 1))?)?;
        }
        Ok(y.reshape((b, self.out_channels, ho, wo))?)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    gamma: Tensor,
    beta: Tensor,
    running_mean: Var,
    running_var: Var,
    channels: usize,
    momentum: f64,
    eps: f64,
}

impl BatchNorm2d {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: store.constant(&format!("{name}.gamma"), &[channels], 1.0)?,
            beta: store.constant(&format!("{name}.beta"), &[channels], 0.0)?,
            running_mean: store.buffer(&format!("{name}.running_mean"), &[channels], 0.0)?,
            running_var: store.buffer(&format!("{name}.running_var"), &[channels], 1.0)?,
            channels,
            momentum: 0.1,
            eps: 1e-5,
        })
    }
}

impl Layer for BatchNorm2d {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let (b, c, h, w) = x.dims4()?;
        if c != self.channels {
            return Err(Error::ShapeMismatch {
                left: format!("batch norm over {} channels", self.channels),
                right: format!("input with {c}"),
            });
        }
        let shape = (1, c, 1, 1);
        let (mean, var) = if train {
            let flat = x.transpose(0, 1)?.reshape((c, b * h * w))?;
            let mean = flat.mean_keepdim(D::Minus1)?;
            let var = flat.broadcast_sub(&mean)?.sqr()?.mean_keepdim(D::Minus1)?;
            let n = (b * h * w) as f64;
            let unbiased = if n > 1.0 { (&var * (n / (n - 1.0)))? } else { var.clone() };
            let m = self.momentum;
            let rm = ((self.running_mean.as_tensor() * (1.0 - m))? + (mean.flatten_all()?.detach() * m)?)?;
            let rv = ((self.running_var.as_tensor() * (1.0 - m))? + (unbiased.flatten_all()?.detach() * m)?)?;
            self.running_mean.set(&rm)?;
            self.running_var.set(&rv)?;
            (mean.reshape(shape)?, var.reshape(shape)?)
        } else {
            (self.running_mean.reshape(shape)?, self.running_var.reshape(shape)?)
        };
        let xhat = x.broadcast_sub(&mean)?.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(xhat
            .broadcast_mul(&self.gamma.reshape(shape)?)?
            .broadcast_add(&self.beta.reshape(shape)?)?)
    }
}

/// Conv, optional batch norm, activation.
pub struct ConvBlock {
    pub conv: Conv2d,
    pub norm: Option<BatchNorm2d>,
    pub act: Activation,
}

impl ConvBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        geometry: ConvGeometry,
        norm: bool,
        act: Activation,
    ) -> Result<Self> {
        let conv = Conv2d::new(store, &format!("{name}.conv"), cin, cout, geometry, !norm)?;
        let norm = if norm {
            Some(BatchNorm2d::new(store, &format!("{name}.bn"), cout)?)
        } else {
            None
        };
        Ok(Self { conv, norm, act })
    }
}

impl Layer for ConvBlock {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut y = self.conv.forward(x, train)?;
        if let Some(bn) = &self.norm {
            y = bn.forward(&y, train)?;
        }
        self.act.apply(&y)
    }
}

pub struct Upsample2x;

impl Layer for Upsample2x {
    fn forward(&self, x: &Tensor, _train: bool) -> Result<Tensor> {
        Ok(upsample_nearest2x(x)?)
    }
}

pub struct AvgPool2;

impl Layer for AvgPool2 {
    fn forward(&self, x: &Tensor, _train: bool) -> Result<Tensor> {
        Ok(avg_pool2(x)?)
    }
}

/// Fully connected `(B, D) -> (B, K)`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Weights uniform in ±1/sqrt(D), zero bias.
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        let bound = 1.0 / (d_in.max(1) as f64).sqrt();
        Ok(Self {
            weight: store.uniform(&format!("{name}.weight"), &[d_out, d_in], bound)?,
            bias: store.constant(&format!("{name}.bias"), &[d_out], 0.0)?,
        })
    }

    pub fn zeros(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        Ok(Self {
            weight: store.constant(&format!("{name}.weight"), &[d_out, d_in], 0.0)?,
            bias: store.constant(&format!("{name}.bias"), &[d_out], 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&self.weight.t()?)?.broadcast_add(&self.bias)?)
    }
}

/// Named stages applied in order.
#[derive(Default)]
pub struct Sequential {
    names: Vec<String>,
    layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, layer: impl Layer + 'static) {
        self.names.push(name.into());
        self.layers.push(Box::new(layer));
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Applies stages `start..end`.
    pub fn forward_range(&self, x: &Tensor, start: usize, end: usize, train: bool) -> Result<Tensor> {
        let mut y = x.clone();
        for layer in &self.layers[start..end] {
            y = layer.forward(&y, train)?;
        }
        Ok(y)
    }
}

impl Layer for Sequential {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        self.forward_range(x, 0, self.layers.len(), train)
    }
}
