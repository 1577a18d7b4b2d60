//! Conversion between host images and `(B, C, H, W)` tensors.

use candle_core::{DType, Device, Tensor};

use crate::data::Sample;
use crate::tensor::{ImageTensor, MaskTensor};
use crate::{Error, Result};

fn check_same_size<'a>(mut sizes: impl Iterator<Item = (usize, usize)>) -> Result<(usize, usize)> {
    let first = sizes.next().ok_or_else(|| Error::Dataset("empty batch".into()))?;
    if let Some(other) = sizes.find(|s| *s != first) {
        return Err(Error::ShapeMismatch {
            left: format!("{}x{}", first.0, first.1),
            right: format!("{}x{}", other.0, other.1),
        });
    }
    Ok(first)
}

pub fn images_to_tensor(images: &[&ImageTensor], dtype: DType) -> Result<Tensor> {
    let (h, w) = check_same_size(images.iter().map(|i| (i.height(), i.width())))?;
    let c = images[0].channels();
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for img in images {
        if img.channels() != c {
            return Err(Error::ShapeMismatch {
                left: format!("{c} channels"),
                right: format!("{} channels", img.channels()),
            });
        }
        data.extend(img.to_chw());
    }
    Ok(Tensor::from_vec(data, (images.len(), c, h, w), &Device::Cpu)?.to_dtype(dtype)?)
}

pub fn masks_to_tensor(masks: &[&MaskTensor], dtype: DType) -> Result<Tensor> {
    let (h, w) = check_same_size(masks.iter().map(|m| m.shape()))?;
    let data: Vec<f32> = masks.iter().flat_map(|m| m.to_f32()).collect();
    Ok(Tensor::from_vec(data, (masks.len(), 1, h, w), &Device::Cpu)?.to_dtype(dtype)?)
}

/// Network input `(I ⊙ (1 − M)) ⊕ M` for an image batch and mask batch.
pub fn masked_input(images: &Tensor, masks: &Tensor) -> Result<Tensor> {
    let keep = (masks.ones_like()? - masks)?;
    let masked = images.broadcast_mul(&keep)?;
    Ok(Tensor::cat(&[&masked, masks], 1)?)
}

/// Image, mask and `(I ⊙ (1 − M)) ⊕ M` tensors for a batch of samples.
pub struct SampleBatch {
    pub images: Tensor,
    pub masks: Tensor,
    pub input: Tensor,
}

impl SampleBatch {
    pub fn new(samples: &[&Sample], dtype: DType) -> Result<Self> {
        let images = images_to_tensor(&samples.iter().map(|s| &s.image).collect::<Vec<_>>(), dtype)?;
        let masks = masks_to_tensor(&samples.iter().map(|s| &s.mask).collect::<Vec<_>>(), dtype)?;
        let input = masked_input(&images, &masks)?;
        Ok(Self { images, masks, input })
    }
}

/// Splits a `(B, C, H, W)` tensor into host images, clamping into [0, 1].
pub fn tensor_to_images(t: &Tensor) -> Result<Vec<ImageTensor>> {
    let (b, c, h, w) = t.dims4()?;
    let flat = t.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
    flat.chunks_exact(c * h * w)
        .take(b)
        .map(|chw| {
            let clamped: Vec<f32> = chw.iter().map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 }).collect();
            ImageTensor::from_chw(h, w, c, &clamped)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{apply_mask, concat_mask_channel};

    #[test]
    fn masked_input_matches_host_arithmetic() {
        let img = ImageTensor::from_fn(5, 4, 3, |y, x, c| (y * 13 + x * 7 + c) as f32 / 60.0);
        let mask = MaskTensor::from_fn(5, 4, |y, x| (y + x) % 3 == 0);
        let host = concat_mask_channel(&apply_mask(&img, &mask).unwrap(), &mask).unwrap().to_chw();
        let i = images_to_tensor(&[&img], DType::F32).unwrap();
        let m = masks_to_tensor(&[&mask], DType::F32).unwrap();
        let dev: Vec<f32> = masked_input(&i, &m).unwrap().flatten_all().unwrap().to_vec1().unwrap();
        assert_eq!(dev, host);
    }

    #[test]
    fn round_trip_images() {
        let a = ImageTensor::from_fn(3, 2, 3, |y, x, c| (y + x + c) as f32 / 10.0);
        let b = ImageTensor::from_fn(3, 2, 3, |y, x, c| (y * x + c) as f32 / 10.0);
        let t = images_to_tensor(&[&a, &b], DType::F32).unwrap();
        assert_eq!(t.dims(), &[2, 3, 3, 2]);
        assert_eq!(tensor_to_images(&t).unwrap(), vec![a, b]);
    }

    #[test]
    fn mixed_sizes_are_rejected() {
        let a = ImageTensor::zeros(3, 3, 3);
        let b = ImageTensor::zeros(4, 3, 3);
        assert!(images_to_tensor(&[&a, &b], DType::F32).is_err());
    }
}
