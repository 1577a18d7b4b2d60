//! Orthonormal 2-D real FFT written as matrix products so autograd covers it,
//! and the Fourier unit built on top of it.

use std::f64::consts::PI;

use candle_core::{DType, Device, Tensor};

use super::layers::{Activation, ConvBlock, Layer};
use super::ops::{avg_pool2, ConvGeometry, PadMode};
use super::params::ParamStore;
use crate::Result;

fn matrix(rows: usize, cols: usize, dtype: DType, f: impl Fn(usize, usize) -> f64) -> Result<Tensor> {
    let data: Vec<f64> = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
    Ok(Tensor::from_vec(data, (rows, cols), &Device::Cpu)?.to_dtype(dtype)?)
}

/// `t · m` over the last axis of a 4-D tensor.
fn right(t: &Tensor, m: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = t.dims4()?;
    let n = m.dim(1)?;
    Ok(t.contiguous()?.reshape((b * c * h, w))?.matmul(m)?.reshape((b, c, h, n))?)
}

/// `m · t` over the second-to-last axis, for symmetric `m`.
fn left_sym(m: &Tensor, t: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = t.dims4()?;
    let tt = t.transpose(2, 3)?.contiguous()?.reshape((b * c * w, h))?;
    Ok(tt.matmul(m)?.reshape((b, c, w, h))?.transpose(2, 3)?.contiguous()?)
}

fn half_len(w: usize) -> usize {
    w / 2 + 1
}

/// Real and imaginary parts of the orthonormal 2-D real FFT of `(B, C, H, W)`,
/// each `(B, C, H, W/2 + 1)`.
pub fn rfft2(x: &Tensor) -> Result<(Tensor, Tensor)> {
    let (_, _, h, w) = x.dims4()?;
    let wf = half_len(w);
    let dt = x.dtype();
    let cw = matrix(w, wf, dt, |n, k| (2.0 * PI * (n * k) as f64 / w as f64).cos())?;
    let sw = matrix(w, wf, dt, |n, k| (2.0 * PI * (n * k) as f64 / w as f64).sin())?;
    let ch = matrix(h, h, dt, |n, k| (2.0 * PI * (n * k) as f64 / h as f64).cos())?;
    let sh = matrix(h, h, dt, |n, k| (2.0 * PI * (n * k) as f64 / h as f64).sin())?;
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let xr = right(x, &cw)?;
    let xs = right(x, &sw)?;
    // Row transform gives Xr - i·Xs; then apply (C - iS) down the columns.
    let re = (left_sym(&ch, &xr)? - left_sym(&sh, &xs)?)?;
    let im = ((left_sym(&ch, &xs)? + left_sym(&sh, &xr)?)? * -1.0)?;
    Ok(((re * scale)?, (im * scale)?))
}

/// Inverse of [`rfft2`] for a signal of width `w`.
pub fn irfft2(re: &Tensor, im: &Tensor, w: usize) -> Result<Tensor> {
    let (_, _, h, wf) = re.dims4()?;
    let dt = re.dtype();
    let ch = matrix(h, h, dt, |n, k| (2.0 * PI * (n * k) as f64 / h as f64).cos())?;
    let sh = matrix(h, h, dt, |n, k| (2.0 * PI * (n * k) as f64 / h as f64).sin())?;
    let weight = |k: usize| if k == 0 || (w % 2 == 0 && k == w / 2) { 1.0 } else { 2.0 };
    let ci = matrix(wf, w, dt, |k, n| weight(k) * (2.0 * PI * (n * k) as f64 / w as f64).cos())?;
    let si = matrix(wf, w, dt, |k, n| weight(k) * (2.0 * PI * (n * k) as f64 / w as f64).sin())?;
    let zr = (left_sym(&ch, re)? - left_sym(&sh, im)?)?;
    let zi = (left_sym(&ch, im)? + left_sym(&sh, re)?)?;
    let x = (right(&zr, &ci)? - right(&zi, &si)?)?;
    Ok((x * (1.0 / ((h * w) as f64).sqrt()))?)
}

/// Pointwise conv, batch norm and ReLU applied in the frequency domain.
pub struct FourierUnit {
    block: ConvBlock,
}

fn pointwise() -> ConvGeometry {
    ConvGeometry { kernel: 1, stride: 1, padding: 0, dilation: 1, pad_mode: PadMode::Zero }
}

impl FourierUnit {
    pub fn new(store: &mut ParamStore, name: &str, cin: usize, cout: usize) -> Result<Self> {
        let block = ConvBlock::new(store, name, 2 * cin, 2 * cout, pointwise(), true, Activation::Relu)?;
        Ok(Self { block })
    }
}

impl Layer for FourierUnit {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let (_, _, _, w) = x.dims4()?;
        let (re, im) = rfft2(x)?;
        let spec = Tensor::cat(&[re, im], 1)?;
        let y = self.block.forward(&spec, train)?;
        let half = y.dim(1)? / 2;
        irfft2(&y.narrow(1, 0, half)?, &y.narrow(1, half, half)?, w)
    }
}

/// Global branch of a fast Fourier convolution: reduce channels, optionally
/// halve resolution, add the Fourier unit's output, project back up.
pub struct SpectralTransform {
    reduce: ConvBlock,
    fourier: FourierUnit,
    expand: super::layers::Conv2d,
    downsample: bool,
}

impl SpectralTransform {
    pub fn new(store: &mut ParamStore, name: &str, cin: usize, cout: usize, downsample: bool) -> Result<Self> {
        let mid = (cout / 2).max(1);
        Ok(Self {
            reduce: ConvBlock::new(store, &format!("{name}.reduce"), cin, mid, pointwise(), true, Activation::Relu)?,
            fourier: FourierUnit::new(store, &format!("{name}.fu"), mid, mid)?,
            expand: super::layers::Conv2d::new(store, &format!("{name}.expand"), mid, cout, pointwise(), false)?,
            downsample,
        })
    }
}

impl Layer for SpectralTransform {
    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let x = if self.downsample { avg_pool2(x)? } else { x.clone() };
        let y = self.reduce.forward(&x, train)?;
        let f = self.fourier.forward(&y, train)?;
        self.expand.forward(&(y + f)?, train)
    }
}
