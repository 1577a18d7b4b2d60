//! CPU tensor ops with hand-written backward passes: patch extraction for
//! convolutions and 2× nearest upsampling / 2×2 pooling.

use candle_core::{bail, CpuStorage, CustomOp1, Layout, Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    Zero,
    Reflect,
}

/// Geometry of a square-kernel convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    pub pad_mode: PadMode,
}

impl ConvGeometry {
    pub fn output_len(&self, input: usize) -> candle_core::Result<usize> {
        let span = self.dilation * (self.kernel - 1) + 1;
        let padded = input + 2 * self.padding;
        if padded < span {
            bail!("input length {input} too small for kernel span {span} with padding {}", self.padding)
        }
        Ok((padded - span) / self.stride + 1)
    }

    /// Source index for each `(output position, kernel tap)`, or `None` for
    /// zero padding.
    fn index_table(&self, input: usize, output: usize) -> Vec<Option<usize>> {
        let mut table = Vec::with_capacity(output * self.kernel);
        for o in 0..output {
            for k in 0..self.kernel {
                let i = (o * self.stride + k * self.dilation) as isize - self.padding as isize;
                table.push(match self.pad_mode {
                    PadMode::Zero => (i >= 0 && i < input as isize).then_some(i as usize),
                    PadMode::Reflect => Some(reflect_index(i, input)),
                });
            }
        }
        table
    }
}

/// Mirror an out-of-range index back into `0..n` without repeating the edge.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

fn dims4(layout: &Layout) -> candle_core::Result<(usize, usize, usize, usize)> {
    if !layout.is_contiguous() {
        bail!("custom op expects a contiguous tensor")
    }
    layout.shape().dims4()
}

fn dims3(layout: &Layout) -> candle_core::Result<(usize, usize, usize)> {
    if !layout.is_contiguous() {
        bail!("custom op expects a contiguous tensor")
    }
    layout.shape().dims3()
}

/// `(B, C, H, W)` to `(B, C·k·k, Ho·Wo)` patch columns.
#[derive(Debug, Clone, Copy)]
pub struct Im2Col {
    pub geometry: ConvGeometry,
}

struct Tables {
    ty: Vec<Option<usize>>,
    tx: Vec<Option<usize>>,
    ho: usize,
    wo: usize,
}

fn tables(g: &ConvGeometry, h: usize, w: usize) -> candle_core::Result<Tables> {
    let ho = g.output_len(h)?;
    let wo = g.output_len(w)?;
    Ok(Tables { ty: g.index_table(h, ho), tx: g.index_table(w, wo), ho, wo })
}

fn im2col<T: Copy + Default>(x: &[T], (b, c, h, w): (usize, usize, usize, usize), g: &ConvGeometry, t: &Tables) -> Vec<T> {
    let k = g.kernel;
    let rows = c * k * k;
    let n = t.ho * t.wo;
    let mut out = vec![T::default(); b * rows * n];
    for bi in 0..b {
        for ci in 0..c {
            let plane = &x[(bi * c + ci) * h * w..(bi * c + ci + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let dst = &mut out[(bi * rows + row) * n..(bi * rows + row + 1) * n];
                    for oy in 0..t.ho {
                        let Some(iy) = t.ty[oy * k + ki] else { continue };
                        let src = &plane[iy * w..(iy + 1) * w];
                        let drow = &mut dst[oy * t.wo..(oy + 1) * t.wo];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            if let Some(ix) = t.tx[ox * k + kj] {
                                *d = src[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn col2im<T: Copy + Default + std::ops::AddAssign>(
    cols: &[T],
    (b, c, h, w): (usize, usize, usize, usize),
    g: &ConvGeometry,
    t: &Tables,
) -> Vec<T> {
    let k = g.kernel;
    let rows = c * k * k;
    let n = t.ho * t.wo;
    let mut out = vec![T::default(); b * c * h * w];
    for bi in 0..b {
        for ci in 0..c {
            let plane = &mut out[(bi * c + ci) * h * w..(bi * c + ci + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let src = &cols[(bi * rows + row) * n..(bi * rows + row + 1) * n];
                    for oy in 0..t.ho {
                        let Some(iy) = t.ty[oy * k + ki] else { continue };
                        for ox in 0..t.wo {
                            if let Some(ix) = t.tx[ox * k + kj] {
                                plane[iy * w + ix] += src[oy * t.wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

impl CustomOp1 for Im2Col {
    fn name(&self) -> &'static str {
        "im2col"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let dims = dims4(layout)?;
        let (b, c, h, w) = dims;
        let t = tables(&self.geometry, h, w)?;
        let k = self.geometry.kernel;
        let shape = Shape::from((b, c * k * k, t.ho * t.wo));
        let off = layout.start_offset();
        let out = match storage {
            CpuStorage::F32(v) => CpuStorage::F32(im2col(&v[off..], dims, &self.geometry, &t)),
            CpuStorage::F64(v) => CpuStorage::F64(im2col(&v[off..], dims, &self.geometry, &t)),
            _ => bail!("im2col supports f32 and f64 only"),
        };
        Ok((out, shape))
    }

    fn bwd(&self, arg: &Tensor, _res: &Tensor, grad_res: &Tensor) -> candle_core::Result<Option<Tensor>> {
        let (_, _, h, w) = arg.dims4()?;
        let grad = grad_res.contiguous()?.apply_op1_no_bwd(&Col2Im { geometry: self.geometry, height: h, width: w })?;
        Ok(Some(grad))
    }
}

/// Adjoint of [`Im2Col`]: scatters-adds patch columns back onto the image.
#[derive(Debug, Clone, Copy)]
pub struct Col2Im {
    pub geometry: ConvGeometry,
    pub height: usize,
    pub width: usize,
}

impl CustomOp1 for Col2Im {
    fn name(&self) -> &'static str {
        "col2im"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let (b, rows, n) = dims3(layout)?;
        let k = self.geometry.kernel;
        if rows % (k * k) != 0 {
            bail!("col2im: {rows} rows is not a multiple of {}", k * k)
        }
        let c = rows / (k * k);
        let t = tables(&self.geometry, self.height, self.width)?;
        if t.ho * t.wo != n {
            bail!("col2im: {n} columns, geometry gives {}", t.ho * t.wo)
        }
        let dims = (b, c, self.height, self.width);
        let off = layout.start_offset();
        let out = match storage {
            CpuStorage::F32(v) => CpuStorage::F32(col2im(&v[off..], dims, &self.geometry, &t)),
            CpuStorage::F64(v) => CpuStorage::F64(col2im(&v[off..], dims, &self.geometry, &t)),
            _ => bail!("col2im supports f32 and f64 only"),
        };
        Ok((out, Shape::from(dims)))
    }
}

fn upsample2x<T: Copy + Default>(x: &[T], (bc, h, w): (usize, usize, usize)) -> Vec<T> {
    let mut out = vec![T::default(); bc * 4 * h * w];
    for p in 0..bc {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * 4 * h * w..(p + 1) * 4 * h * w];
        for y in 0..2 * h {
            for xo in 0..2 * w {
                dst[y * 2 * w + xo] = src[(y / 2) * w + xo / 2];
            }
        }
    }
    out
}

fn pool2<T>(x: &[T], (bc, h, w): (usize, usize, usize), scale: T) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<Output = T>,
{
    let (ho, wo) = (h / 2, w / 2);
    let mut out = vec![T::default(); bc * ho * wo];
    for p in 0..bc {
        let src = &x[p * h * w..(p + 1) * h * w];
        for y in 0..ho {
            for xo in 0..wo {
                let s = src[2 * y * w + 2 * xo]
                    + src[2 * y * w + 2 * xo + 1]
                    + src[(2 * y + 1) * w + 2 * xo]
                    + src[(2 * y + 1) * w + 2 * xo + 1];
                out[(p * ho + y) * wo + xo] = s * scale;
            }
        }
    }
    out
}

/// Nearest-neighbour 2× upsampling of `(B, C, H, W)`.
#[derive(Debug, Clone, Copy)]
pub struct Upsample2x;

impl CustomOp1 for Upsample2x {
    fn name(&self) -> &'static str {
        "upsample2x"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let (b, c, h, w) = dims4(layout)?;
        let off = layout.start_offset();
        let out = match storage {
            CpuStorage::F32(v) => CpuStorage::F32(upsample2x(&v[off..], (b * c, h, w))),
            CpuStorage::F64(v) => CpuStorage::F64(upsample2x(&v[off..], (b * c, h, w))),
            _ => bail!("upsample2x supports f32 and f64 only"),
        };
        Ok((out, Shape::from((b, c, 2 * h, 2 * w))))
    }

    fn bwd(&self, _arg: &Tensor, _res: &Tensor, grad_res: &Tensor) -> candle_core::Result<Option<Tensor>> {
        Ok(Some(grad_res.contiguous()?.apply_op1_no_bwd(&Pool2 { scale: 1.0 })?))
    }
}

/// Scaled sum over non-overlapping 2×2 blocks; `scale = 0.25` is average pooling.
#[derive(Debug, Clone, Copy)]
pub struct Pool2 {
    pub scale: f64,
}

impl CustomOp1 for Pool2 {
    fn name(&self) -> &'static str {
        "pool2"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let (b, c, h, w) = dims4(layout)?;
        if h % 2 != 0 || w % 2 != 0 {
            bail!("pool2 needs even spatial dims, got {h}x{w}")
        }
        let off = layout.start_offset();
        let out = match storage {
            CpuStorage::F32(v) => CpuStorage::F32(pool2(&v[off..], (b * c, h, w), self.scale as f32)),
            CpuStorage::F64(v) => CpuStorage::F64(pool2(&v[off..], (b * c, h, w), self.scale)),
            _ => bail!("pool2 supports f32 and f64 only"),
        };
        Ok((out, Shape::from((b, c, h / 2, w / 2))))
    }

    fn bwd(&self, _arg: &Tensor, _res: &Tensor, grad_res: &Tensor) -> candle_core::Result<Option<Tensor>> {
        let up = grad_res.contiguous()?.apply_op1_no_bwd(&Upsample2x)?;
        Ok(Some((up * self.scale)?))
    }
}

/// Patch columns with autograd.
pub fn im2col_tensor(x: &Tensor, geometry: ConvGeometry) -> candle_core::Result<Tensor> {
    x.contiguous()?.apply_op1(Im2Col { geometry })
}

pub fn upsample_nearest2x(x: &Tensor) -> candle_core::Result<Tensor> {
    x.contiguous()?.apply_op1(Upsample2x)
}

pub fn avg_pool2(x: &Tensor) -> candle_core::Result<Tensor> {
    x.contiguous()?.apply_op1(Pool2 { scale: 0.25 })
}

/// Reflect-pads the spatial dims of `(B, C, H, W)` by `pad` on every side.
pub fn reflect_pad(x: &Tensor, pad: usize) -> candle_core::Result<Tensor> {
    let g = ConvGeometry { kernel: 1, stride: 1, padding: pad, dilation: 1, pad_mode: PadMode::Reflect };
    let (b, c, h, w) = x.dims4()?;
    im2col_tensor(x, g)?.reshape((b, c, h + 2 * pad, w + 2 * pad))
}
