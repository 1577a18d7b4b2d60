//! Minimal raster plots. There is no text rendering; series names and axis
//! ranges go into a sidecar legend written by the caller.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::tensor::ImageTensor;
use crate::{Error, Result};

/// Tableau-like categorical colours.
pub const PALETTE: [[u8; 3]; 10] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
];

const MARGIN: i64 = 24;
const AXIS: Rgb<u8> = Rgb([40, 40, 40]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    w: i64,
    h: i64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn to_px(&self, x: f64, y: f64) -> (i64, i64) {
        let fx = (x - self.x.0) / (self.x.1 - self.x.0);
        let fy = (y - self.y.0) / (self.y.1 - self.y.0);
        let px = MARGIN + (fx * (self.w - 2 * MARGIN) as f64).round() as i64;
        let py = self.h - MARGIN - (fy * (self.h - 2 * MARGIN) as f64).round() as i64;
        (px, py)
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Bresenham line, two pixels thick.
fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        put(img, x, y, c);
        put(img, x, y + 1, c);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn canvas(frame: &Frame) -> RgbImage {
    let mut img = RgbImage::from_pixel(frame.w as u32, frame.h as u32, Rgb([255, 255, 255]));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (_, gy) = frame.to_px(frame.x.0, frame.y.0 + f * (frame.y.1 - frame.y.0));
        let (gx, _) = frame.to_px(frame.x.0 + f * (frame.x.1 - frame.x.0), frame.y.0);
        line(&mut img, (MARGIN, gy), (frame.w - MARGIN, gy), GRID);
        line(&mut img, (gx, MARGIN), (gx, frame.h - MARGIN), GRID);
    }
    line(&mut img, (MARGIN, frame.h - MARGIN), (frame.w - MARGIN, frame.h - MARGIN), AXIS);
    line(&mut img, (MARGIN, MARGIN), (MARGIN, frame.h - MARGIN), AXIS);
    img
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    img.save(path)?;
    Ok(())
}

/// Line chart; `y_range` fixes the vertical axis (e.g. `[0, 1]` for accuracies).
pub fn line_plot(series: &[Series], y_range: Option<(f64, f64)>, path: &Path) -> Result<()> {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let frame = Frame {
        w: 480,
        h: 320,
        x: range(all().map(|p| p.0)),
        y: y_range.unwrap_or_else(|| range(all().map(|p| p.1))),
    };
    let mut img = canvas(&frame);
    for (i, s) in series.iter().enumerate() {
        let c = Rgb(PALETTE[i % PALETTE.len()]);
        let px: Vec<(i64, i64)> = s.points.iter().map(|&(x, y)| frame.to_px(x, y)).collect();
        for w in px.windows(2) {
            line(&mut img, w[0], w[1], c);
        }
        for &(x, y) in &px {
            for d in -2..=2 {
                put(&mut img, x + d, y, c);
                put(&mut img, x, y + d, c);
            }
        }
    }
    save(&img, path)
}

/// Scatter plot of 2D points coloured by label.
pub fn scatter_plot(points: &[(f64, f64)], labels: &[usize], path: &Path) -> Result<()> {
    let frame = Frame { w: 400, h: 400, x: range(points.iter().map(|p| p.0)), y: range(points.iter().map(|p| p.1)) };
    let mut img = canvas(&frame);
    for (&(x, y), &l) in points.iter().zip(labels) {
        let (px, py) = frame.to_px(x, y);
        let c = Rgb(PALETTE[l % PALETTE.len()]);
        for dy in -2..=2i64 {
            for dx in -2..=2i64 {
                if dx * dx + dy * dy <= 5 {
                    put(&mut img, px + dx, py + dy, c);
                }
            }
        }
    }
    save(&img, path)
}

/// Tiles equally sized images row by row with a 2-pixel white gutter. Grey
/// images are expanded to RGB; short rows are padded with white.
pub fn image_grid(rows: &[Vec<ImageTensor>]) -> Result<ImageTensor> {
    const GAP: usize = 2;
    let first = rows.iter().flatten().next().ok_or_else(|| Error::Dataset("image grid needs at least one image".into()))?;
    let (h, w) = (first.height(), first.width());
    if let Some(bad) = rows.iter().flatten().find(|i| (i.height(), i.width()) != (h, w)) {
        return Err(Error::ShapeMismatch { left: format!("{h}x{w}"), right: format!("{}x{}", bad.height(), bad.width()) });
    }
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let (gh, gw) = (rows.len() * (h + GAP) - GAP, cols * (w + GAP) - GAP);
    let rgb: Vec<Vec<ImageTensor>> = rows.iter().map(|r| r.iter().map(ImageTensor::to_rgb).collect()).collect();
    Ok(ImageTensor::from_fn(gh, gw, 3, |y, x, c| {
        let (r, yy) = (y / (h + GAP), y % (h + GAP));
        let (k, xx) = (x / (w + GAP), x % (w + GAP));
        match rgb[r].get(k) {
            Some(img) if yy < h && xx < w => img.get(yy, xx, c),
            _ => 1.0,
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_maps_corners_inside_margins() {
        let f = Frame { w: 100, h: 80, x: (0.0, 10.0), y: (-1.0, 1.0) };
        assert_eq!(f.to_px(0.0, -1.0), (MARGIN, 80 - MARGIN));
        assert_eq!(f.to_px(10.0, 1.0), (100 - MARGIN, MARGIN));
    }

    #[test]
    fn writes_pngs() {
        let dir = tempfile::tempdir().unwrap();
        let s = Series { name: "a".into(), points: vec![(1.0, 0.2), (2.0, 0.5), (3.0, 0.4)] };
        line_plot(&[s], Some((0.0, 1.0)), &dir.path().join("l.png")).unwrap();
        scatter_plot(&[(0.0, 0.0), (1.0, 2.0)], &[0, 1], &dir.path().join("s.png")).unwrap();
        let img = image::open(dir.path().join("s.png")).unwrap().to_rgb8();
        assert_eq!((img.width(), img.height()), (400, 400));
    }

    #[test]
    fn grid_places_tiles_with_gutters() {
        let a = ImageTensor::from_fn(3, 2, 3, |_, _, _| 0.0);
        let b = ImageTensor::from_fn(3, 2, 1, |_, _, _| 0.5);
        let g = image_grid(&[vec![a.clone(), b], vec![a]]).unwrap();
        assert_eq!(g.shape(), (8, 6, 3));
        assert_eq!(g.get(0, 0, 0), 0.0);
        assert_eq!(g.get(0, 2, 1), 1.0);
        assert_eq!(g.get(2, 5, 2), 0.5);
        assert_eq!(g.get(7, 5, 0), 1.0);
        assert!(image_grid(&[]).is_err());
    }
}
