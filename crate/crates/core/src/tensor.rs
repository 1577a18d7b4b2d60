//! Host-side image and mask containers plus the masking arithmetic that
//! prepares inpainting inputs: `X = I ⊙ (1 − M)` followed by `X ⊕ M`.

use crate::{Error, Result};

/// Real-valued image, `H × W × C` row-major (channel fastest), values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!("empty image {height}x{width}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("{channels} channels (expected 1 or 3)")));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidImage(format!(
                "buffer holds {} values, {height}x{width}x{channels} needs {}",
                data.len(),
                height * width * channels
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidImage(format!("value {} at index {i} outside [0, 1]", data[i])));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    /// Builds an image from `f(y, x, c)`; values are clamped into [0, 1].
    pub fn from_fn(height: usize, width: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    let v = f(y, x, c);
                    data.push(if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 });
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Channel-major copy (`C × H × W`), the layout the networks consume.
    pub fn to_chw(&self) -> Vec<f32> {
        let mut out = vec![0.0; self.data.len()];
        let plane = self.height * self.width;
        for (i, px) in self.data.chunks_exact(self.channels).enumerate() {
            for (c, v) in px.iter().enumerate() {
                out[c * plane + i] = *v;
            }
        }
        out
    }

    /// Inverse of [`to_chw`](Self::to_chw); values are clamped into [0, 1].
    pub fn from_chw(height: usize, width: usize, channels: usize, chw: &[f32]) -> Result<Self> {
        if chw.len() != height * width * channels {
            return Err(Error::InvalidImage(format!(
                "CHW buffer holds {} values, expected {}",
                chw.len(),
                height * width * channels
            )));
        }
        let plane = height * width;
        Ok(Self::from_fn(height, width, channels, |y, x, c| chw[c * plane + y * width + x]))
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, self.channels, |y, x, c| {
            self.get(y, self.width - 1 - x, c)
        })
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.height, self.width, self.channels, |y, x, c| {
            self.get(self.height - 1 - y, x, c)
        })
    }

    /// Broadcasts a single-channel image to RGB; RGB images are returned as is.
    pub fn to_rgb(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        Self::from_fn(self.height, self.width, 3, |y, x, _| self.get(y, x, 0))
    }
}

/// Binary mask, `H × W`; 1 marks pixels to inpaint or occlude.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskTensor {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl MaskTensor {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidImage(format!(
                "mask buffer holds {} values, {height}x{width} needs {}",
                data.len(),
                height * width
            )));
        }
        if let Some(index) = data.iter().position(|&v| v > 1) {
            return Err(Error::NonBinaryMask {
                value: data[index] as f32,
                index,
            });
        }
        Ok(Self { height, width, data })
    }

    /// Accepts exactly 0.0 and 1.0; anything else is rejected.
    pub fn from_f32(height: usize, width: usize, values: &[f32]) -> Result<Self> {
        let mut data = Vec::with_capacity(values.len());
        for (index, &v) in values.iter().enumerate() {
            if v == 0.0 {
                data.push(0);
            } else if v == 1.0 {
                data.push(1);
            } else {
                return Err(Error::NonBinaryMask { value: v, index });
            }
        }
        Self::new(height, width, data)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![1; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(y, x)));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    /// Number of set pixels.
    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn complement(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        check_mask_pair(self, other)?;
        Ok(Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a | b).collect(),
        })
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        check_mask_pair(self, other)?;
        Ok(Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a & b).collect(),
        })
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, |y, x| self.get(y, self.width - 1 - x))
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.height, self.width, |y, x| self.get(self.height - 1 - y, x))
    }
}

fn check_mask_pair(a: &MaskTensor, b: &MaskTensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            left: format!("mask {}x{}", a.height, a.width),
            right: format!("mask {}x{}", b.height, b.width),
        });
    }
    Ok(())
}

pub(crate) fn check_shapes(image: &ImageTensor, mask: &MaskTensor) -> Result<()> {
    if (image.height, image.width) != mask.shape() {
        return Err(Error::ShapeMismatch {
            left: format!("image {}x{}x{}", image.height, image.width, image.channels),
            right: format!("mask {}x{}", mask.height, mask.width),
        });
    }
    Ok(())
}

/// Zeroes masked pixels: `X[h,w,c] = I[h,w,c] × (1 − M[h,w])`.
///
/// The binary complement stands in for `M⁻¹`; unmasked pixels are copied
/// bit-for-bit.
pub fn apply_mask(image: &ImageTensor, mask: &MaskTensor) -> Result<ImageTensor> {
    check_shapes(image, mask)?;
    let c = image.channels;
    let data = image
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| if mask.data[i / c] == 1 { 0.0 } else { v })
        .collect();
    Ok(ImageTensor {
        data,
        ..image.clone()
    })
}

/// `H × W × (C+1)` network input: image channels followed by the mask channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// HWC order.
    pub data: Vec<f32>,
}

impl ModelInput {
    /// Channel-major copy for the networks.
    pub fn to_chw(&self) -> Vec<f32> {
        let plane = self.height * self.width;
        let mut out = vec![0.0; self.data.len()];
        for (i, px) in self.data.chunks_exact(self.channels).enumerate() {
            for (c, v) in px.iter().enumerate() {
                out[c * plane + i] = *v;
            }
        }
        out
    }

    /// Channels `0..C`, i.e. the masked image.
    pub fn image_channels(&self) -> ImageTensor {
        let c = self.channels - 1;
        let data = self
            .data
            .chunks_exact(self.channels)
            .flat_map(|px| px[..c].iter().copied())
            .collect();
        ImageTensor {
            height: self.height,
            width: self.width,
            channels: c,
            data,
        }
    }
}

/// Concatenates the mask as an extra trailing channel (`X ⊕ M`).
pub fn concat_mask_channel(masked_image: &ImageTensor, mask: &MaskTensor) -> Result<ModelInput> {
    check_shapes(masked_image, mask)?;
    let c = masked_image.channels;
    let mut data = Vec::with_capacity(masked_image.data.len() + mask.data.len());
    for (px, &m) in masked_image.data.chunks_exact(c).zip(&mask.data) {
        data.extend_from_slice(px);
        data.push(m as f32);
    }
    Ok(ModelInput {
        height: masked_image.height,
        width: masked_image.width,
        channels: c + 1,
        data,
    })
}

/// Pastes `generated` inside the mask and keeps `original` outside it.
pub fn composite(original: &ImageTensor, generated: &ImageTensor, mask: &MaskTensor) -> Result<ImageTensor> {
    check_shapes(original, mask)?;
    if original.shape() != generated.shape() {
        return Err(Error::ShapeMismatch {
            left: format!("{:?}", original.shape()),
            right: format!("{:?}", generated.shape()),
        });
    }
    let c = original.channels;
    let data = original
        .data
        .iter()
        .zip(&generated.data)
        .enumerate()
        .map(|(i, (&o, &g))| if mask.data[i / c] == 1 { g } else { o })
        .collect();
    Ok(ImageTensor {
        data,
        ..original.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image_2x2() -> ImageTensor {
        ImageTensor::new(2, 2, 3, vec![0.5, 0.5, 0.5, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]).unwrap()
    }

    #[test]
    fn empty_mask_is_identity_and_full_mask_blanks() {
        let img = image_2x2();
        assert_eq!(apply_mask(&img, &MaskTensor::zeros(2, 2)).unwrap(), img);
        assert!(apply_mask(&img, &MaskTensor::ones(2, 2)).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_masked_pixel() {
        let img = image_2x2();
        let mask = MaskTensor::new(2, 2, vec![1, 0, 0, 0]).unwrap();
        let x = apply_mask(&img, &mask).unwrap();
        assert_eq!(&x.data()[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(&x.data()[3..], &img.data()[3..]);
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let err = apply_mask(&image_2x2(), &MaskTensor::zeros(3, 2)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x2x3") && msg.contains("3x2"), "{msg}");
    }

    #[test]
    fn non_binary_mask_rejected() {
        assert!(matches!(MaskTensor::from_f32(1, 2, &[0.0, 0.5]), Err(Error::NonBinaryMask { index: 1, .. })));
        assert!(MaskTensor::new(1, 1, vec![2]).is_err());
    }

    #[test]
    fn concat_shape_and_mask_channel() {
        let img = ImageTensor::zeros(256, 256, 3);
        let input = concat_mask_channel(&img, &MaskTensor::zeros(256, 256)).unwrap();
        assert_eq!((input.height, input.width, input.channels), (256, 256, 4));
        assert!(input.data.chunks(4).all(|px| px[3] == 0.0));
    }

    fn arb_pair() -> impl Strategy<Value = (ImageTensor, MaskTensor)> {
        (1usize..6, 1usize..6).prop_flat_map(|(h, w)| {
            (
                prop::collection::vec(0.0f32..=1.0, h * w * 3),
                prop::collection::vec(0u8..=1, h * w),
            )
                .prop_map(move |(d, m)| (ImageTensor::new(h, w, 3, d).unwrap(), MaskTensor::new(h, w, m).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn masking_invariants((img, mask) in arb_pair()) {
            let once = apply_mask(&img, &mask).unwrap();
            prop_assert_eq!(&apply_mask(&once, &mask).unwrap(), &once);
            let other = apply_mask(&img, &mask.complement()).unwrap();
            for ((a, b), c) in once.data().iter().zip(other.data()).zip(img.data()) {
                prop_assert_eq!(a + b, *c);
            }
            let input = concat_mask_channel(&once, &mask).unwrap();
            prop_assert_eq!(input.image_channels(), once);
        }

        #[test]
        fn chw_round_trip((img, _m) in arb_pair()) {
            let back = ImageTensor::from_chw(img.height(), img.width(), 3, &img.to_chw()).unwrap();
            prop_assert_eq!(back, img);
        }
    }
}
