//! Procedural stand-in for a skin-pattern re-identification dataset.
//!
//! Each synthetic individual owns a persistent pattern (a thresholded sum of
//! oriented sinusoids plus Gaussian spots) drawn on an elliptical body. Renders
//! vary pose, lighting and the textured background, so identity is carried by
//! the pattern rather than by global color.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ablation::RegionMaskSet;
use crate::data::Sample;
use crate::tensor::{ImageTensor, MaskTensor};
use crate::{Error, Result};

/// Smallest renderable image side.
pub const MIN_SIZE: usize = 32;
/// Default desk-scale image side.
pub const DEFAULT_SIZE: usize = 64;

const BODY_HALF_LENGTH: f64 = 0.40;
const BODY_HALF_WIDTH: f64 = 0.17;
const SPOT_SIGMA: f64 = 0.09;
/// Normalized body radius bounding the pattern region (inner body).
const PATTERN_RADIUS: f64 = 0.8;
/// Normalized body radius where the fish (rim) region starts.
const FISH_RIM_RADIUS: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct PatternIdentity {
    pub identity_seed: u64,
    /// Cycles per body length.
    pub stripe_frequencies: Vec<f64>,
    /// Stripe wave directions in body coordinates, radians.
    pub stripe_angles: Vec<f64>,
    /// In [0, 2π).
    pub phase_offsets: Vec<f64>,
    /// Body coordinates, x along the body axis in [-1, 1].
    pub spot_centers: Vec<(f64, f64)>,
    pub base_color: [f64; 3],
}

/// Deterministic identity from a seed.
pub fn generate_identity(identity_seed: u64) -> PatternIdentity {
    let mut rng = ChaCha8Rng::seed_from_u64(identity_seed ^ 0x5eed_1d00);
    let n_stripes = 3;
    let stripe_frequencies = (0..n_stripes).map(|_| rng.random_range(1.5..5.0)).collect();
    let stripe_angles = (0..n_stripes).map(|_| rng.random_range(-PI / 2.0..PI / 2.0)).collect();
    let phase_offsets = (0..n_stripes).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let spot_centers = (0..4)
        .map(|_| (rng.random_range(-0.8..0.8), rng.random_range(-0.35..0.35)))
        .collect();
    // Body color barely varies between individuals.
    let base_color = [
        0.80 + rng.random_range(-0.03..0.03),
        0.68 + rng.random_range(-0.03..0.03),
        0.30 + rng.random_range(-0.03..0.03),
    ];
    PatternIdentity {
        identity_seed,
        stripe_frequencies,
        stripe_angles,
        phase_offsets,
        spot_centers,
        base_color,
    }
}

impl PatternIdentity {
    /// True where the body carries a dark stripe, at body coordinates `(u, v)`.
    fn stripe_at(&self, u: f64, v: f64) -> bool {
        let mut wave = 0.0;
        for ((f, a), p) in self.stripe_frequencies.iter().zip(&self.stripe_angles).zip(&self.phase_offsets) {
            let along = u * a.cos() + v * a.sin();
            wave += (PI * f * along + p).sin();
        }
        wave /= self.stripe_frequencies.len() as f64;
        let spots: f64 = self
            .spot_centers
            .iter()
            .map(|(cx, cy)| (-((u - cx).powi(2) + (v - cy).powi(2)) / (2.0 * SPOT_SIGMA * SPOT_SIGMA)).exp())
            .sum();
        wave + 1.5 * spots > 0.15
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderParams {
    pub pose_seed: u64,
    /// Pixels.
    pub translation: (f64, f64),
    /// Degrees in [-15, 15].
    pub rotation: f64,
    /// Multiplicative, in [0.8, 1.2].
    pub brightness_jitter: f64,
    pub background_texture_seed: u64,
}

impl RenderParams {
    /// Draws pose and lighting jitter for an image of side `size`.
    pub fn from_seed(pose_seed: u64, size: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(pose_seed ^ 0x0905e);
        let shift = size as f64 / 16.0;
        Self {
            pose_seed,
            translation: (rng.random_range(-shift..=shift), rng.random_range(-shift..=shift)),
            rotation: rng.random_range(-15.0..=15.0),
            brightness_jitter: rng.random_range(0.8..=1.2),
            background_texture_seed: rng.random(),
        }
    }
}

struct BackgroundTexture {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl BackgroundTexture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..4)
            .map(|_| {
                (
                    rng.random_range(0.5..4.0),
                    rng.random_range(0.0..PI),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.02..0.07),
                )
            })
            .collect();
        Self { waves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        self.waves
            .iter()
            .map(|(f, a, p, amp)| amp * (2.0 * PI * f * (x * a.cos() + y * a.sin()) + p).sin())
            .sum()
    }
}

/// Body-frame coordinates of pixel `(px, py)`: `(u, v)` scaled so the body
/// ellipse is the unit disk.
fn body_coords(px: f64, py: f64, size: usize, params: &RenderParams) -> (f64, f64) {
    let s = size as f64;
    let cx = s / 2.0 + params.translation.0;
    let cy = s / 2.0 + params.translation.1;
    let theta = params.rotation.to_radians();
    let (dx, dy) = (px + 0.5 - cx, py + 0.5 - cy);
    let along = dx * theta.cos() + dy * theta.sin();
    let across = -dx * theta.sin() + dy * theta.cos();
    (along / (BODY_HALF_LENGTH * s), across / (BODY_HALF_WIDTH * s))
}

/// Renders one image of `identity` with `label`; returns the classification
/// sample (all-zero mask) and its background/fish/pattern annotations.
pub fn render_sample(
    identity: &PatternIdentity,
    label: usize,
    params: &RenderParams,
    size: usize,
) -> Result<(Sample, RegionMaskSet)> {
    if size < MIN_SIZE {
        return Err(Error::Config(format!("render size {size} is below the minimum of {MIN_SIZE}")));
    }
    let texture = BackgroundTexture::new(params.background_texture_seed);
    let stripe_color = [0.12, 0.16, 0.38];
    let water = [0.36, 0.46, 0.50];
    let aspect = BODY_HALF_WIDTH / BODY_HALF_LENGTH;
    let mut radii = vec![0.0; size * size];

    let image = ImageTensor::from_fn(size, size, 3, |y, x, c| {
        let (u, v) = body_coords(x as f64, y as f64, size, params);
        let r = (u * u + v * v).sqrt();
        radii[y * size + x] = r;
        let value = if r <= 1.0 {
            let color = if identity.stripe_at(u, v * aspect) {
                stripe_color
            } else {
                identity.base_color
            };
            color[c] * (1.0 - 0.25 * r * r)
        } else {
            let t = texture.at(x as f64 / size as f64, y as f64 / size as f64);
            water[c] + t
        };
        ((value * params.brightness_jitter).clamp(0.01, 1.0)) as f32
    });

    let background = MaskTensor::from_fn(size, size, |y, x| radii[y * size + x] > 1.0);
    let fish = MaskTensor::from_fn(size, size, |y, x| {
        let r = radii[y * size + x];
        r <= 1.0 && r >= FISH_RIM_RADIUS
    });
    let pattern = MaskTensor::from_fn(size, size, |y, x| radii[y * size + x] <= PATTERN_RADIUS);
    let regions = RegionMaskSet::new(background, fish, pattern)?;
    let sample = Sample::classification(image, label, format!("id{label}_pose{}", params.pose_seed));
    Ok((sample, regions))
}

/// Inpainting mask over the inner body: an ellipse scaled by a random radius
/// in [0.65, 0.85] and nudged along the body axis.
fn inpainting_mask(size: usize, params: &RenderParams, rng: &mut ChaCha8Rng) -> MaskTensor {
    let rho: f64 = rng.random_range(0.65..0.85);
    let shift: f64 = rng.random_range(-0.1..0.1);
    MaskTensor::from_fn(size, size, |y, x| {
        let (u, v) = body_coords(x as f64, y as f64, size, params);
        ((u - shift).powi(2) + v * v).sqrt() <= rho
    })
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_individuals: usize,
    pub n_per_individual: usize,
    /// Extra renders per individual used only for inpainting.
    pub inpaint_per_individual: usize,
    pub size: usize,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(n_individuals: usize, n_per_individual: usize, seed: u64) -> Self {
        Self {
            n_individuals,
            n_per_individual,
            inpaint_per_individual: (n_per_individual / 4).max(1),
            size: DEFAULT_SIZE,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub identities: Vec<PatternIdentity>,
    /// Labeled, all-zero masks.
    pub classification: Vec<Sample>,
    pub classification_regions: Vec<RegionMaskSet>,
    /// Unlabeled, masks over the pattern region.
    pub inpainting: Vec<Sample>,
    pub inpainting_regions: Vec<RegionMaskSet>,
}

impl SyntheticDataset {
    /// `(image, mask, source_id)` triples for the inpainting dataset builder.
    pub fn inpainting_pairs(&self) -> Vec<(ImageTensor, MaskTensor, String)> {
        self.inpainting
            .iter()
            .map(|s| (s.image.clone(), s.mask.clone(), s.source_id.clone()))
            .collect()
    }

    /// `(image, label, source_id)` triples for the classification dataset builder.
    pub fn classification_triples(&self) -> Vec<(ImageTensor, usize, String)> {
        self.classification
            .iter()
            .map(|s| (s.image.clone(), s.label.expect("labeled"), s.source_id.clone()))
            .collect()
    }
}

/// `n_individuals × n_per_individual` labeled 64×64 renders plus inpainting pairs.
pub fn generate_dataset(n_individuals: usize, n_per_individual: usize, seed: u64) -> Result<SyntheticDataset> {
    generate_dataset_with(&SyntheticConfig::new(n_individuals, n_per_individual, seed))
}

pub fn generate_dataset_with(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    if cfg.n_individuals < 2 {
        return Err(Error::Config(format!("need at least 2 individuals, got {}", cfg.n_individuals)));
    }
    if cfg.n_per_individual < 4 {
        return Err(Error::Config(format!(
            "need at least 4 samples per individual, got {}",
            cfg.n_per_individual
        )));
    }
    if cfg.size < MIN_SIZE {
        return Err(Error::Config(format!("image size {} is below the minimum of {MIN_SIZE}", cfg.size)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let identities: Vec<PatternIdentity> = (0..cfg.n_individuals).map(|_| generate_identity(rng.random())).collect();

    let mut out = SyntheticDataset {
        identities: identities.clone(),
        classification: Vec::new(),
        classification_regions: Vec::new(),
        inpainting: Vec::new(),
        inpainting_regions: Vec::new(),
    };
    for (label, identity) in identities.iter().enumerate() {
        for i in 0..cfg.n_per_individual {
            let params = RenderParams::from_seed(rng.random(), cfg.size);
            let (mut sample, regions) = render_sample(identity, label, &params, cfg.size)?;
            sample.source_id = format!("cls_{label}_{i:04}");
            out.classification.push(sample);
            out.classification_regions.push(regions);
        }
        for i in 0..cfg.inpaint_per_individual {
            let params = RenderParams::from_seed(rng.random(), cfg.size);
            let (sample, regions) = render_sample(identity, label, &params, cfg.size)?;
            let mask = inpainting_mask(cfg.size, &params, &mut rng);
            out.inpainting.push(Sample::new(sample.image, mask, None, format!("inp_{label}_{i:04}"))?);
            out.inpainting_regions.push(regions);
        }
    }
    Ok(out)
}
