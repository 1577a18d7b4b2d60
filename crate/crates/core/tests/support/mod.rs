#![allow(dead_code)]

use candle_core::{Device, Tensor};
use patreid::data::{build_classification_dataset, build_inpainting_dataset, DatasetSplits};
use patreid::nn::ParamStore;
use patreid::tensor::ImageTensor;
use patreid::synthetic::{generate_dataset_with, SyntheticConfig};

/// Worst relative error between analytic and central-difference gradients.
pub struct GradReport {
    pub checked: usize,
    pub worst: f64,
    pub worst_at: String,
}

/// For every trainable tensor under `prefix` that receives a gradient,
/// compares the analytic derivative of its largest-gradient element with a
/// central finite difference.
pub fn check_gradients(store: &ParamStore, prefix: &str, loss: impl Fn() -> Tensor) -> GradReport {
    let grads = loss().backward().unwrap();
    let eps = 1e-6;
    let mut report = GradReport { checked: 0, worst: 0.0, worst_at: String::new() };
    for (name, p) in store.iter().filter(|(k, p)| p.trainable && k.starts_with(prefix)) {
        let Some(g) = grads.get(&p.var) else { continue };
        let g: Vec<f64> = g.flatten_all().unwrap().to_vec1().unwrap();
        let (i, &gi) = g.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap();
        if gi.abs() < 1e-7 {
            continue;
        }
        let base: Vec<f64> = p.var.flatten_all().unwrap().to_vec1().unwrap();
        let eval = |delta: f64| {
            let mut v = base.clone();
            v[i] += delta;
            p.var.set(&Tensor::from_vec(v, p.var.shape(), &Device::Cpu).unwrap()).unwrap();
            loss().to_scalar::<f64>().unwrap()
        };
        let numeric = (eval(eps) - eval(-eps)) / (2.0 * eps);
        p.var.set(&Tensor::from_vec(base, p.var.shape(), &Device::Cpu).unwrap()).unwrap();
        let rel = (numeric - gi).abs() / numeric.abs().max(gi.abs());
        report.checked += 1;
        if rel > report.worst {
            report.worst = rel;
            report.worst_at = format!("{name}[{i}]: analytic {gi:e}, numeric {numeric:e}");
        }
    }
    report
}

pub fn synthetic_inpainting(n_individuals: usize, n_per: usize, size: usize, seed: u64) -> DatasetSplits {
    let mut cfg = SyntheticConfig::new(n_individuals, n_per, seed);
    cfg.size = size;
    let data = generate_dataset_with(&cfg).unwrap();
    build_inpainting_dataset(data.inpainting_pairs(), seed).unwrap()
}

/// Box-filter downsampling by an integer factor.
pub fn shrink(image: &ImageTensor, size: usize) -> ImageTensor {
    let f = image.height() / size;
    ImageTensor::from_fn(size, size, image.channels(), |y, x, c| {
        let mut sum = 0.0;
        for dy in 0..f {
            for dx in 0..f {
                sum += image.get(y * f + dy, x * f + dx, c);
            }
        }
        sum / (f * f) as f32
    })
}

/// Synthetic classification splits; sizes below the generator's minimum of
/// 32 are produced by downsampling.
pub fn synthetic_classification(n_individuals: usize, n_per: usize, size: usize, seed: u64) -> DatasetSplits {
    let mut cfg = SyntheticConfig::new(n_individuals, n_per, seed);
    cfg.size = size.max(32);
    let data = generate_dataset_with(&cfg).unwrap();
    let triples = data.classification_triples().into_iter().map(|(img, l, id)| (shrink(&img, size), l, id)).collect();
    build_classification_dataset(triples, seed).unwrap()
}

/// Seeded uniform `[0, 1)` f64 tensor.
pub fn uniform(shape: &[usize], seed: u64) -> Tensor {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

/// Two small architectures on 32×32 synthetic data, one epoch everywhere.
pub fn tiny_experiment(out: &std::path::Path) -> patreid::config::ExperimentConfig {
    use patreid::encoder::Backbone;
    use patreid::inpaint::{Arch, ArchitectureConfig};
    let mut cfg = patreid::config::ExperimentConfig::default();
    cfg.out = out.to_path_buf();
    cfg.set_seed(5);
    cfg.archs = vec![Arch::DeepFillV2, Arch::Lama];
    cfg.dataset.n_individuals = 3;
    cfg.dataset.n_per_individual = 20;
    cfg.dataset.inpaint_per_individual = 4;
    cfg.dataset.size = 32;
    cfg.inpainting.epochs = 1;
    cfg.classifier.epochs = 2;
    cfg.ablation.epochs = 1;
    cfg.ablation.per_class = 10;
    cfg.ablation.backbones = vec![Arch::Lama.into(), Arch::AotGan.into(), Backbone::Baseline];
    for arch in [Arch::DeepFillV2, Arch::Lama] {
        let mut a = ArchitectureConfig::desk(arch);
        a.base_channels = 4;
        cfg.architectures.insert(arch, a);
    }
    cfg
}
