//! Grad-CAM heatmaps and colour overlays.

use candle_core::{DType, Tensor, Var, D};

use crate::classifier::{argmax, ClassifierModel};
use crate::tensor::ImageTensor;
use crate::{Error, Result};

/// Name of the colour map used by [`overlay`].
pub const COLORMAP: &str = "viridis";

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub height: usize,
    pub width: usize,
    /// Row-major, in [0, 1].
    pub values: Vec<f32>,
    pub target_class: usize,
    pub epoch: usize,
    pub layer_id: String,
    /// The map was zero everywhere before normalisation.
    pub all_zero: bool,
}

impl Heatmap {
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.values[y * self.width + x]
    }
}

/// `relu(Σ_c mean(∂y/∂A_c) · A_c)` for one sample; `act` and `grad` are `(C, h, w)`.
pub fn weighted_activation_map(act: &Tensor, grad: &Tensor) -> Result<Vec<f32>> {
    let (c, h, w) = act.dims3()?;
    let weights = grad.to_dtype(DType::F64)?.reshape((c, h * w))?.mean(D::Minus1)?;
    let a = act.to_dtype(DType::F64)?.reshape((c, h * w))?;
    let cam = weights.unsqueeze(0)?.matmul(&a)?.squeeze(0)?.relu()?;
    Ok(cam.to_dtype(DType::F32)?.to_vec1()?)
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn bilinear_resize(values: &[f32], (h, w): (usize, usize), (oh, ow): (usize, usize)) -> Vec<f32> {
    let coord = |dst: usize, n_in: usize, n_out: usize| {
        let s = ((dst as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = s.floor() as usize;
        (i0, (i0 + 1).min(n_in - 1), (s - i0 as f64) as f32)
    };
    let mut out = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        let (y0, y1, fy) = coord(y, h, oh);
        for x in 0..ow {
            let (x0, x1, fx) = coord(x, w, ow);
            let top = values[y0 * w + x0] * (1.0 - fx) + values[y0 * w + x1] * fx;
            let bottom = values[y1 * w + x0] * (1.0 - fx) + values[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Min-max normalisation into [0, 1]; a constant map becomes all zeros and
/// the flag is set.
pub fn normalize(values: &[f32]) -> (Vec<f32>, bool) {
    let lo = values.iter().cloned().fold(f32::INFINITY, f32::min);
    let hi = values.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    if !(hi > lo) {
        return (vec![0.0; values.len()], true);
    }
    (values.iter().map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).collect(), false)
}

/// Grad-CAM of a scalar `score` with respect to the activation `act`
/// (`(1, C, h, w)`), resized to `out` and normalised.
pub fn gradcam_map(act: &Var, score: &Tensor, out: (usize, usize)) -> Result<(Vec<f32>, bool)> {
    let grads = score.backward()?;
    let a = act.as_tensor();
    let g = match grads.get(a) {
        Some(g) => g.clone(),
        None => a.zeros_like()?,
    };
    let (_, _, h, w) = a.dims4()?;
    let cam = weighted_activation_map(&a.squeeze(0)?, &g.squeeze(0)?)?;
    let all_zero = cam.iter().all(|&v| v == 0.0);
    let (norm, flat) = normalize(&bilinear_resize(&cam, (h, w), out));
    Ok((norm, all_zero || flat))
}

/// Last encoder stage, the default Grad-CAM target.
pub fn default_layer(clf: &ClassifierModel) -> &str {
    clf.encoder().network().names().last().map(String::as_str).unwrap_or_default()
}

/// Grad-CAM for `image`. `target_class` defaults to the predicted class and
/// `layer_id` to [`default_layer`].
pub fn gradcam(
    clf: &ClassifierModel,
    image: &ImageTensor,
    target_class: Option<usize>,
    layer_id: Option<&str>,
) -> Result<Heatmap> {
    let names = clf.encoder().network().names();
    let layer_id = layer_id.unwrap_or_else(|| default_layer(clf));
    let layer = names.iter().position(|n| n == layer_id).ok_or_else(|| Error::UnknownLayer {
        layer: layer_id.to_string(),
        valid: names.join(", "),
    })?;
    let x = clf.encoder().input_tensor(&[image])?;
    let (act, logits) = clf.logits_with_activation(&x, layer)?;
    let target = match target_class {
        Some(t) if t < clf.classes() => t,
        Some(t) => return Err(Error::Config(format!("target class {t} outside 0..{}", clf.classes()))),
        None => argmax(&logits.to_dtype(DType::F64)?.squeeze(0)?.to_vec1::<f64>()?),
    };
    let score = logits.squeeze(0)?.get(target)?;
    let (values, all_zero) = gradcam_map(&act, &score, (image.height(), image.width()))?;
    Ok(Heatmap {
        height: image.height(),
        width: image.width(),
        values,
        target_class: target,
        epoch: 0,
        layer_id: layer_id.to_string(),
        all_zero,
    })
}

const VIRIDIS: [[f32; 3]; 9] = [
    [0.267004, 0.004874, 0.329415],
    [0.282623, 0.140926, 0.457517],
    [0.253935, 0.265254, 0.529983],
    [0.206756, 0.371758, 0.553117],
    [0.163625, 0.471133, 0.558148],
    [0.127568, 0.566949, 0.550556],
    [0.134692, 0.658636, 0.517649],
    [0.266941, 0.748751, 0.440573],
    [0.993248, 0.906157, 0.143936],
];

/// Piecewise-linear viridis colour for `t` in [0, 1].
pub fn viridis(t: f32) -> [f32; 3] {
    let s = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f32;
    let i = s.floor() as usize;
    if i >= VIRIDIS.len() - 1 {
        return VIRIDIS[VIRIDIS.len() - 1];
    }
    let f = s - i as f32;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f, a[2] + (b[2] - a[2]) * f]
}

/// `(1 − α) · image + α · viridis(heatmap)`; grey images are expanded to RGB.
pub fn overlay(heatmap: &Heatmap, image: &ImageTensor, alpha: f32) -> Result<ImageTensor> {
    if (heatmap.height, heatmap.width) != (image.height(), image.width()) {
        return Err(Error::ShapeMismatch {
            left: format!("heatmap {}x{}", heatmap.height, heatmap.width),
            right: format!("image {}x{}", image.height(), image.width()),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("overlay alpha must lie in [0, 1], got {alpha}")));
    }
    let rgb = image.to_rgb();
    Ok(ImageTensor::from_fn(image.height(), image.width(), 3, |y, x, c| {
        let v = rgb.get(y, x, c);
        if alpha == 0.0 {
            v
        } else {
            (1.0 - alpha) * v + alpha * viridis(heatmap.get(y, x))[c]
        }
    }))
}
