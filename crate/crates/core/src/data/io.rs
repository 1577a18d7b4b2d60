//! 8-bit PNG storage: images as RGB (or gray), masks as single-channel 0/255.

use std::path::Path;

use image::imageops::FilterType;
use image::{GrayImage, RgbImage};

use crate::tensor::{ImageTensor, MaskTensor};
use crate::{Error, Result};

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn save_image_png(image: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let (h, w, c) = image.shape();
    if c == 1 {
        let buf = GrayImage::from_fn(w as u32, h as u32, |x, y| image::Luma([to_u8(image.get(y as usize, x as usize, 0))]));
        buf.save(path)?;
    } else {
        let buf = RgbImage::from_fn(w as u32, h as u32, |x, y| {
            let (y, x) = (y as usize, x as usize);
            image::Rgb([to_u8(image.get(y, x, 0)), to_u8(image.get(y, x, 1)), to_u8(image.get(y, x, 2))])
        });
        buf.save(path)?;
    }
    Ok(())
}

/// Loads an RGB image as reals in [0, 1], optionally resizing to `size × size`.
pub fn load_image_png(path: impl AsRef<Path>, size: Option<usize>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let mut img = image::open(path)
        .map_err(|e| Error::Dataset(format!("cannot read image {}: {e}", path.display())))?
        .to_rgb8();
    if let Some(s) = size {
        if img.width() as usize != s || img.height() as usize != s {
            img = image::imageops::resize(&img, s as u32, s as u32, FilterType::Triangle);
        }
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    ImageTensor::new(h, w, 3, data)
}

pub fn save_mask_png(mask: &MaskTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let (h, w) = mask.shape();
    let buf = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        image::Luma([if mask.get(y as usize, x as usize) { 255 } else { 0 }])
    });
    buf.save(path)?;
    Ok(())
}

/// Loads a mask; gray levels of 128 and above count as set.
pub fn load_mask_png(path: impl AsRef<Path>, size: Option<usize>) -> Result<MaskTensor> {
    let path = path.as_ref();
    let mut img = image::open(path)
        .map_err(|e| Error::Dataset(format!("cannot read mask {}: {e}", path.display())))?
        .to_luma8();
    if let Some(s) = size {
        if img.width() as usize != s || img.height() as usize != s {
            img = image::imageops::resize(&img, s as u32, s as u32, FilterType::Nearest);
        }
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    MaskTensor::new(h, w, img.into_raw().into_iter().map(|v| u8::from(v >= 128)).collect())
}
