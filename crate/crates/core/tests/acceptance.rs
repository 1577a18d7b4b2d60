//! Acceptance suite: every criterion runs in turn and prints one PASS/FAIL
//! line with its measurement and runtime. Criteria 6 and 7 share one LaMa
//! pre-training run. The process exits non-zero if any gating criterion
//! fails.

mod support;

#[path = "../../analytics/tests/support/oracles.rs"]
mod oracles;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use candle_core::DType;
use ndarray::Array2;
use patreid::ablation::{
    region_ablate, render_ablation_report, row_marks, run_ablation, AblationCondition, AblationData, AblationRow,
    AblationSchedule, AblationTable, BackboneEntry, CellMark, Region,
};
use patreid::batch::masked_input;
use patreid::classifier::{attach_head, attach_zero_head, train_classifier, ClassifierSchedule, TrainMode};
use patreid::config::{DatasetSource, ExperimentConfig};
use patreid::data::{
    build_classification_dataset, build_inpainting_dataset, save_image_png, save_mask_png, write_manifest,
    DatasetSplits, ManifestRecord,
};
use patreid::encoder::{isolate_encoder, Backbone, Encoder};
use patreid::explain::{default_layer, gradcam, gradcam_map};
use patreid::inpaint::train::composite_tensor;
use patreid::inpaint::{build_model, train_inpainting, Arch, ArchitectureConfig, InpaintingModel, TrainingSchedule};
use patreid::pipeline::{run_all, RunDirectory};
use patreid::synthetic::{generate_dataset, generate_dataset_with, SyntheticConfig};
use patreid::tensor::{apply_mask, composite, concat_mask_channel, ImageTensor, MaskTensor};
use patreid_analytics as analytics;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    gating: bool,
}

fn report(c: &Criterion, elapsed: Duration, outcome: Outcome) -> bool {
    let (ok, detail) = match outcome {
        Ok(d) if elapsed <= c.budget => (true, d),
        Ok(d) => (false, format!("{d}; over the {:?} budget", c.budget)),
        Err(e) => (false, e),
    };
    let tag = if ok { "PASS" } else { "FAIL" };
    let gate = if c.gating { "" } else { " (non-gating)" };
    println!("[{tag}] {:>2}. {}{gate}: {detail} [{:.1}s]", c.id, c.name, elapsed.as_secs_f64());
    ok || !c.gating
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
        )),
    }
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

// 1. Clustering metrics against from-definition oracles.
fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(2..=4);
        let n = rng.random_range(k + 2..=60);
        let d = rng.random_range(1..=8);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-5.0..5.0));
        let mut pred: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        pred.rotate_left(rng.random_range(0..n));
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
        let pairs = [
            (analytics::adjusted_rand_index(&truth, &pred).unwrap(), oracles::ari(&truth, &pred)),
            (analytics::mutual_information(&truth, &pred).unwrap(), oracles::mutual_information(&truth, &pred)),
            (analytics::silhouette_score(x.view(), &pred).unwrap(), oracles::silhouette(&rows, &pred)),
            (analytics::davies_bouldin(x.view(), &pred).unwrap(), oracles::davies_bouldin(&rows, &pred)),
            (analytics::calinski_harabasz(x.view(), &pred).unwrap(), oracles::calinski_harabasz(&rows, &pred)),
        ];
        for (lib, oracle) in pairs {
            worst = worst.max((lib - oracle).abs());
        }
    }
    ensure!(worst <= 1e-9, "worst absolute difference {worst:e} > 1e-9");
    Ok(format!("20 datasets, worst absolute difference {worst:.1e}"))
}

// 2. k-means monotonicity, blob recovery and determinism.
fn kmeans_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..100 {
        let n = rng.random_range(5..80);
        let d = rng.random_range(1..6);
        let k = rng.random_range(1..=n.min(6));
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0));
        let r = analytics::kmeans(x.view(), k, trial).unwrap();
        for w in r.inertia_history.windows(2) {
            ensure!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "trial {trial}: inertia rose {} -> {}", w[0], w[1]);
        }
    }
    let corners = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
    let noise = rand_distr::Normal::new(0.0, 0.1).unwrap();
    let mut labels = Vec::new();
    let x = Array2::from_shape_fn((100, 2), |(i, j)| {
        if j == 0 {
            labels.push(i / 25);
        }
        corners[i / 25][j] + rand_distr::Distribution::sample(&noise, &mut rng)
    });
    let a = analytics::kmeans(x.view(), 4, 0).unwrap();
    let b = analytics::kmeans(x.view(), 4, 0).unwrap();
    let ari = analytics::adjusted_rand_index(&labels, &a.assignments).unwrap();
    ensure!(ari == 1.0, "blob ARI {ari}");
    ensure!(a.assignments == b.assignments && a.inertia == b.inertia, "same seed gave different results");
    Ok("100 instances monotone, 4-blob ARI 1.0, deterministic".into())
}

// 3. Masking, channel concatenation and compositing.
fn mask_plumbing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in 0..100 {
        let (h, w) = (rng.random_range(1..24), rng.random_range(1..24));
        let image = ImageTensor::from_fn(h, w, 3, |_, _, _| rng.random::<f32>());
        let generated = ImageTensor::from_fn(h, w, 3, |_, _, _| rng.random::<f32>());
        let p = rng.random::<f64>();
        let mask = MaskTensor::from_fn(h, w, |_, _| rng.random_bool(p));
        let empty = MaskTensor::zeros(h, w);

        ensure!(apply_mask(&image, &empty).unwrap() == image, "pair {t}: empty mask changed the image");
        ensure!(composite(&image, &generated, &empty).unwrap() == image, "pair {t}: empty-mask composite");
        let kept = apply_mask(&image, &mask).unwrap();
        let rest = apply_mask(&image, &mask.complement()).unwrap();
        let sum: Vec<f32> = kept.data().iter().zip(rest.data()).map(|(a, b)| a + b).collect();
        ensure!(sum == image.data(), "pair {t}: complement sum differs from the image");
        let input = concat_mask_channel(&kept, &mask).unwrap();
        ensure!(input.image_channels() == kept, "pair {t}: concatenated image channels differ");
        let out = composite(&image, &generated, &mask).unwrap();
        for y in 0..h {
            for x in 0..w {
                ensure!(input.data[(y * w + x) * 4 + 3] == mask.get(y, x) as u8 as f32, "pair {t}: mask channel");
                for c in 0..3 {
                    let (o, i, g) = (out.get(y, x, c), image.get(y, x, c), generated.get(y, x, c));
                    let want = if mask.get(y, x) { g } else { i };
                    ensure!(o.to_bits() == want.to_bits(), "pair {t}: pixel ({y},{x},{c}) not preserved");
                    if !mask.get(y, x) {
                        ensure!(kept.get(y, x, c).to_bits() == i.to_bits(), "pair {t}: unmasked pixel altered");
                    }
                }
            }
        }
    }
    Ok("100 random pairs".into())
}

fn grad_config(arch: Arch, channels: usize) -> ArchitectureConfig {
    let mut c = ArchitectureConfig::desk(arch);
    c.base_channels = channels;
    c
}

// 4. Finite-difference gradient checks.
fn gradient_checks() -> Outcome {
    let mut lines = Vec::new();
    for arch in Arch::ALL {
        let m = InpaintingModel::new(arch, grad_config(arch, 8), 11, DType::F64).unwrap();
        let images = support::uniform(&[2, 3, 8, 8], 1);
        let masks = support::uniform(&[2, 1, 8, 8], 2).ge(0.6).unwrap().to_dtype(DType::F64).unwrap();
        let input = masked_input(&images, &masks).unwrap();
        let r = support::check_gradients(m.generator_params(), "", || {
            let raw = m.forward(&input, true).unwrap().raw;
            let comp = composite_tensor(&raw, &images, &masks).unwrap();
            (comp - &images).unwrap().abs().unwrap().mean_all().unwrap()
        });
        ensure!(r.checked > 0 && r.worst < 1e-3, "{arch} generator L1: {}", r.worst_at);
        lines.push(format!("{arch} {:.1e}", r.worst));

        let enc = Encoder::random_as(arch, grad_config(arch, 4), 3, (8, 8), DType::F64).unwrap();
        let clf = attach_head(enc, 4, 3).unwrap();
        let x = support::uniform(&[3, 4, 8, 8], 5);
        let y = candle_core::Tensor::new(&[0u32, 2, 3], x.device()).unwrap();
        let loss = || {
            let logits = clf.logits(&x, true).unwrap();
            candle_nn::loss::cross_entropy(&logits, &y).unwrap()
        };
        let r = support::check_gradients(clf.head_params(), "", &loss);
        ensure!(r.checked > 0 && r.worst < 1e-3, "{arch} head cross-entropy: {}", r.worst_at);
        let e = support::check_gradients(clf.encoder().params(), "", &loss);
        ensure!(e.worst < 1e-3, "{arch} encoder cross-entropy: {}", e.worst_at);
        lines.push(format!("classifier/{arch} {:.1e}", r.worst.max(e.worst)));
    }
    Ok(format!("worst relative error: {}", lines.join(", ")))
}

fn six_by_n(n_per: usize, size: usize, seed: u64) -> DatasetSplits {
    let mut cfg = SyntheticConfig::new(6, n_per, seed);
    cfg.size = size;
    let data = generate_dataset_with(&cfg).unwrap();
    build_classification_dataset(data.classification_triples(), seed).unwrap()
}

// 5. Shallow mode leaves the encoder untouched; deep mode does not.
fn freeze_contract() -> Outcome {
    let data = six_by_n(10, 64, 5);
    let schedule = ClassifierSchedule { epochs: 15, ..Default::default() };
    let mut results = Vec::new();
    for mode in TrainMode::ALL {
        let enc = Encoder::random(Arch::Lama, ArchitectureConfig::desk(Arch::Lama), 1, (64, 64)).unwrap();
        let mut clf = attach_head(enc, 6, 1).unwrap();
        let before = (clf.encoder().params().checksum().unwrap(), clf.head_params().checksum().unwrap());
        train_classifier(&mut clf, &data, mode, &schedule, None).unwrap();
        let after = (clf.encoder().params().checksum().unwrap(), clf.head_params().checksum().unwrap());
        results.push((mode, before.0 != after.0, before.1 != after.1));
    }
    ensure!(results[0] == (TrainMode::Shallow, false, true), "shallow: encoder changed {}, head changed {}", results[0].1, results[0].2);
    ensure!(results[1] == (TrainMode::Deep, true, true), "deep: encoder changed {}, head changed {}", results[1].1, results[1].2);
    Ok("shallow: encoder checksum identical, head changed; deep: both changed".into())
}

/// LaMa pre-trained on the 6 × 100 synthetic task, shared by criteria 6 and 7.
struct Pretrained {
    model: InpaintingModel,
    classification: DatasetSplits,
    elapsed: Duration,
}

fn pretrain_lama() -> Pretrained {
    let t = Instant::now();
    let data = generate_dataset(6, 100, 0).unwrap();
    let inpainting = build_inpainting_dataset(data.inpainting_pairs(), 0).unwrap();
    let classification = build_classification_dataset(data.classification_triples(), 0).unwrap();
    let mut model = build_model(Arch::Lama, &ArchitectureConfig::desk(Arch::Lama), 0).unwrap();
    train_inpainting(&mut model, &inpainting, &TrainingSchedule::default(), None).unwrap();
    Pretrained { model, classification, elapsed: t.elapsed() }
}

// 6. Pre-train then deep fine-tune reaches 0.80 test accuracy; an untrained
// head sits at chance.
fn end_to_end(p: &Pretrained) -> Outcome {
    let encoder = isolate_encoder(&p.model, (64, 64)).unwrap();
    let chance = attach_zero_head(encoder.deep_copy().unwrap(), 6).unwrap().evaluate(&p.classification.test).unwrap();
    ensure!((chance.accuracy - 1.0 / 6.0).abs() <= 0.05, "untrained head accuracy {:.3} not within 0.05 of 1/6", chance.accuracy);
    let mut clf = attach_head(encoder, 6, 0).unwrap();
    let log = train_classifier(&mut clf, &p.classification, TrainMode::Deep, &ClassifierSchedule::default(), None).unwrap();
    let acc = log.test.unwrap().accuracy;
    ensure!(acc >= 0.80, "deep test accuracy {acc:.3} < 0.80 (untrained head {:.3})", chance.accuracy);
    Ok(format!("deep test accuracy {acc:.3} (best epoch {}), untrained head {:.3}", log.best_epoch, chance.accuracy))
}

// 7. Shallow probes on the pre-trained encoder beat randomly initialised ones.
fn pretraining_helps(p: &Pretrained) -> Outcome {
    let (mut pre, mut rnd) = (Vec::new(), Vec::new());
    for seed in 0..3u64 {
        let schedule = ClassifierSchedule { seed, ..Default::default() };
        let mut a = attach_head(isolate_encoder(&p.model, (64, 64)).unwrap(), 6, seed).unwrap();
        pre.push(train_classifier(&mut a, &p.classification, TrainMode::Shallow, &schedule, None).unwrap().test.unwrap().accuracy);
        let enc = Encoder::random(Arch::Lama, ArchitectureConfig::desk(Arch::Lama), 1000 + seed, (64, 64)).unwrap();
        let mut b = attach_head(enc, 6, seed).unwrap();
        rnd.push(train_classifier(&mut b, &p.classification, TrainMode::Shallow, &schedule, None).unwrap().test.unwrap().accuracy);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mp, mr) = (mean(&pre), mean(&rnd));
    let detail = format!("pretrained {mp:.3} {pre:.3?} vs random {mr:.3} {rnd:.3?}, gap {:.3}", mp - mr);
    ensure!(mp - mr >= 0.10, "{detail} < 0.10");
    Ok(detail)
}

// 8. Region ablation: pixel exactness, full grid and table marks.
fn ablation_semantics() -> Outcome {
    let mut cfg = SyntheticConfig::new(6, 10, 8);
    cfg.size = 32;
    let data = generate_dataset_with(&cfg).unwrap();
    let ad = AblationData::new(data.classification, data.classification_regions).unwrap();
    for (i, s) in ad.samples().iter().enumerate() {
        let regions = ad.regions(i);
        for region in [Region::Background, Region::Fish, Region::Pattern] {
            let mask = regions.get(region);
            for (cond, keep) in [(AblationCondition::Only(region), true), (AblationCondition::Without(region), false)] {
                let out = region_ablate(&s.image, regions, cond).unwrap();
                for y in 0..32 {
                    for x in 0..32 {
                        for c in 0..3 {
                            let want = if mask.get(y, x) == keep { s.image.get(y, x, c) } else { 0.0 };
                            ensure!(out.get(y, x, c).to_bits() == want.to_bits(), "sample {i} {cond:?} pixel ({y},{x})");
                        }
                    }
                }
            }
        }
        ensure!(region_ablate(&s.image, regions, AblationCondition::All).unwrap() == s.image, "sample {i}: All altered the image");
    }

    let mut entries = Vec::new();
    for arch in Arch::ALL {
        entries.push(BackboneEntry { backbone: arch.into(), encoder: Ok(Encoder::random(arch, grad_config(arch, 4), 0, (32, 32)).unwrap()) });
    }
    entries.push(BackboneEntry { backbone: Backbone::Baseline, encoder: Ok(Encoder::baseline(grad_config(Arch::Lama, 4), 0, (32, 32)).unwrap()) });
    let schedule = AblationSchedule { classifier: ClassifierSchedule { epochs: 1, ..Default::default() }, ..Default::default() };
    let table = run_ablation(&entries, &TrainMode::ALL, &ad, &schedule).unwrap();
    ensure!(table.len() == 7 * 5 * 2 && table.skipped.is_empty(), "grid has {} of 70 cells", table.len());

    let (b, i, n) = (CellMark { best: true, worst: false }, CellMark { best: false, worst: true }, CellMark::default());
    let fixture = AblationTable {
        rows: vec![
            AblationRow { backbone: Arch::Lama.into(), mode: TrainMode::Deep, accuracy: [0.89, 0.96, 0.93, 0.99, 0.98, 0.94, 0.99].map(Some) },
            AblationRow { backbone: Arch::AotGan.into(), mode: TrainMode::Deep, accuracy: [0.75, 0.88, 0.85, 0.82, 0.89, 0.93, 0.97].map(Some) },
        ],
        skipped: vec![],
    };
    let rendered = render_ablation_report(&fixture);
    ensure!(rendered.marks[0] == [i, b, n, b, n, i, n], "lama marks {:?}", rendered.marks[0]);
    ensure!(rendered.marks[1] == [i, b, n, i, n, b, n], "aotgan marks {:?}", rendered.marks[1]);
    ensure!(row_marks(&[Some(0.17); 7]) == [CellMark { best: true, worst: true }; 7], "constant row marks");
    Ok(format!("{} samples pixel-exact, 70-cell grid complete, fixture marks match", ad.len()))
}

// 9. Grad-CAM invariants and the left-half toy network.
fn gradcam_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    for (k, arch) in Arch::ALL.into_iter().enumerate() {
        let mut cfg = grad_config(arch, 4);
        if arch == Arch::AotGan {
            cfg.dilation_rates = vec![1, 2];
        }
        let clf = attach_head(Encoder::random(arch, cfg, k as u64, (16, 16)).unwrap(), 6, k as u64).unwrap();
        for _ in 0..if k == 0 { 14 } else { 12 } {
            let img = ImageTensor::from_fn(16, 16, 3, |_, _, _| rng.random::<f32>());
            let hm = gradcam(&clf, &img, Some(rng.random_range(0..6)), None).unwrap();
            ensure!((hm.height, hm.width, hm.values.len()) == (16, 16, 256), "{arch}: heatmap shape");
            ensure!(hm.layer_id == default_layer(&clf), "{arch}: layer {}", hm.layer_id);
            let lo = hm.values.iter().cloned().fold(f32::INFINITY, f32::min);
            let hi = hm.values.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            ensure!(hm.all_zero && hi == 0.0 || (lo, hi) == (0.0, 1.0), "{arch}: range [{lo}, {hi}]");
            checked += 1;
        }
    }
    ensure!(checked == 50, "checked {checked} inputs");

    let dev = candle_core::Device::Cpu;
    let (h, w) = (16usize, 16usize);
    let mut worst: f32 = 1.0;
    for _ in 0..10 {
        let pixels: Vec<f32> = (0..h * w).map(|i| if i % w < w / 2 { rng.random_range(0.2f32..1.0) } else { 0.0 }).collect();
        let x = candle_core::Tensor::from_vec(pixels, (1, 1, h, w), &dev).unwrap();
        let filter = candle_core::Tensor::from_vec(vec![1.0f32 / 9.0; 9], (1, 1, 3, 3), &dev).unwrap();
        let act = candle_core::Var::from_tensor(&x.conv2d(&filter, 1, 1, 1, 1).unwrap().relu().unwrap()).unwrap();
        let head: Vec<f32> = (0..h * w).map(|_| rng.random_range(0.5f32..1.5)).collect();
        let head = candle_core::Tensor::from_vec(head, (1, 1, h, w), &dev).unwrap();
        let score = (act.as_tensor() * &head).unwrap().sum_all().unwrap();
        let (map, _) = gradcam_map(&act, &score, (h, w)).unwrap();
        let left: f32 = (0..h * w).filter(|i| i % w < w / 2).map(|i| map[i]).sum();
        worst = worst.min(left / map.iter().sum::<f32>());
    }
    ensure!(worst >= 0.9, "left-half share {worst:.3} < 0.90");
    Ok(format!("50 heatmaps valid, minimum left-half share {worst:.3}"))
}

/// Reduced full pipeline: every architecture and stage at 32 × 32.
fn pipeline_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.out = out.to_path_buf();
    cfg.set_seed(11);
    cfg.dataset.n_per_individual = 20;
    cfg.dataset.inpaint_per_individual = 4;
    cfg.dataset.size = 32;
    cfg.inpainting.epochs = 1;
    cfg.classifier.epochs = 2;
    cfg.ablation.epochs = 1;
    cfg.ablation.per_class = 20;
    cfg.clustering.projections = vec!["pca".into(), "tsne".into()];
    for arch in Arch::ALL {
        cfg.architectures.insert(arch, grad_config(arch, 8));
    }
    cfg
}

fn csv_files(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

// 10. Identical seeds give byte-identical metrics and embeddings.
fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_all(&pipeline_config(&a)).map_err(|e| e.to_string())?;
    run_all(&pipeline_config(&b)).map_err(|e| e.to_string())?;
    let files = csv_files(&a);
    ensure!(files == csv_files(&b), "runs wrote different CSV files");
    let mut metrics = 0;
    let mut embeddings = 0;
    for f in &files {
        let s = f.to_string_lossy();
        metrics += usize::from(s.ends_with("metrics.csv"));
        embeddings += usize::from(s.starts_with("embeddings"));
        ensure!(std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap(), "{s} differs");
    }
    ensure!(metrics == 8 && embeddings == 8, "found {metrics} metrics and {embeddings} embedding CSVs");
    Ok(format!("{} CSVs identical ({metrics} metrics, {embeddings} embeddings)", files.len()))
}

// 11. Manifest-driven run emits the table schemas.
fn real_data_mode() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("data");
    let mut cfg = SyntheticConfig::new(6, 12, 21);
    cfg.inpaint_per_individual = 3;
    cfg.size = 32;
    let data = generate_dataset_with(&cfg).unwrap();
    let mut cls = Vec::new();
    for (k, s) in data.classification.iter().enumerate() {
        let p = format!("frames/{k}.png");
        save_image_png(&s.image, src.join(&p)).unwrap();
        cls.push(ManifestRecord { image_path: p, mask_path: String::new(), label: s.label, source_id: s.source_id.clone(), split: String::new() });
    }
    write_manifest(src.join("classification.csv"), &cls).unwrap();
    let mut inp = Vec::new();
    for (k, s) in data.inpainting.iter().enumerate() {
        let (p, m) = (format!("inp/{k}.png"), format!("inp/{k}_mask.png"));
        save_image_png(&s.image, src.join(&p)).unwrap();
        save_mask_png(&s.mask, src.join(&m)).unwrap();
        inp.push(ManifestRecord { image_path: p, mask_path: m, label: None, source_id: s.source_id.clone(), split: String::new() });
    }
    write_manifest(src.join("inpainting.csv"), &inp).unwrap();
    // One shared, hand-drawn-style region set.
    let shared = &data.classification_regions[0];
    save_mask_png(&shared.background, src.join("regions/background.png")).unwrap();
    save_mask_png(&shared.fish, src.join("regions/fish.png")).unwrap();
    save_mask_png(&shared.pattern, src.join("regions/pattern.png")).unwrap();
    std::fs::write(
        src.join("regions.csv"),
        "source_id,background_path,fish_path,pattern_path\n*,regions/background.png,regions/fish.png,regions/pattern.png\n",
    )
    .unwrap();

    let mut exp = pipeline_config(&dir.path().join("run"));
    exp.archs = vec![Arch::DeepFillV2, Arch::Lama];
    exp.ablation.backbones = vec![Arch::DeepFillV2.into(), Arch::Lama.into(), Backbone::Baseline];
    exp.dataset.source = DatasetSource::Manifest;
    exp.dataset.classification_manifest = Some(src.join("classification.csv"));
    exp.dataset.inpainting_manifest = Some(src.join("inpainting.csv"));
    exp.dataset.region_manifest = Some(src.join("regions.csv"));
    run_all(&exp).map_err(|e| e.to_string())?;
    let run = RunDirectory::new(&exp.out);
    let ablation = std::fs::read_to_string(run.ablation().join("ablation.csv")).unwrap();
    let header = ablation.lines().next().unwrap_or_default();
    ensure!(
        header == "algorithm,mode,background,fish,pattern,no_background,no_fish,no_pattern,all",
        "ablation header `{header}`"
    );
    ensure!(ablation.lines().count() == 1 + 3 * 2, "ablation has {} rows", ablation.lines().count() - 1);
    let clustering = std::fs::read_to_string(run.clustering().join("clustering.csv")).unwrap();
    let names: Vec<&str> = clustering.lines().skip(1).filter_map(|l| l.split(',').next()).collect();
    ensure!(
        clustering.starts_with("encoder,AdjRand,MutInfo,Silhouette,daviesBouldin,calinskiHarabasz\n")
            && names == ["deepfillv2", "ref-deepfillv2", "lama", "ref-lama"],
        "clustering rows {names:?}"
    );
    Ok("ablation CSV with 7 region columns, clustering CSV with frozen and refined rows".into())
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "metric-oracle equivalence", budget: Duration::from_secs(30), gating: true },
        Criterion { id: 2, name: "k-means correctness", budget: Duration::from_secs(30), gating: true },
        Criterion { id: 3, name: "mask plumbing", budget: Duration::from_secs(10), gating: true },
        Criterion { id: 4, name: "gradient checks", budget: minutes(2), gating: true },
        Criterion { id: 5, name: "shallow-mode freeze contract", budget: minutes(5), gating: true },
        Criterion { id: 6, name: "end-to-end learnability", budget: minutes(120), gating: true },
        Criterion { id: 7, name: "inpainting pre-training beats random init", budget: minutes(60), gating: true },
        Criterion { id: 8, name: "ablation harness semantics", budget: minutes(20), gating: true },
        Criterion { id: 9, name: "Grad-CAM sanity", budget: minutes(1), gating: true },
        Criterion { id: 10, name: "reproducibility", budget: minutes(60), gating: true },
        Criterion { id: 11, name: "real-data mode schemas", budget: minutes(30), gating: false },
    ];
    let simple: [(usize, fn() -> Outcome); 9] = [
        (1, metric_oracles),
        (2, kmeans_correctness),
        (3, mask_plumbing),
        (4, gradient_checks),
        (5, freeze_contract),
        (8, ablation_semantics),
        (9, gradcam_sanity),
        (10, reproducibility),
        (11, real_data_mode),
    ];
    // Numeric arguments select criteria (`cargo test --test acceptance -- 1 4`).
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: usize| only.is_empty() || only.contains(&id);
    let mut all_ok = true;
    for c in criteria.iter().filter(|c| wanted(c.id) || (c.id == 6 && wanted(7))) {
        let t = Instant::now();
        if let Some((_, f)) = simple.iter().find(|(id, _)| *id == c.id) {
            let outcome = guarded(*f);
            all_ok &= report(c, t.elapsed(), outcome);
        } else if c.id == 6 {
            // Pre-training is shared; its time counts towards both criteria.
            let pre = catch_unwind(pretrain_lama);
            let (o6, t6) = match &pre {
                Ok(p) => {
                    let t = Instant::now();
                    let o = guarded(|| end_to_end(p));
                    (o, p.elapsed + t.elapsed())
                }
                Err(_) => (Err("LaMa pre-training panicked".to_string()), t.elapsed()),
            };
            all_ok &= report(c, t6, o6);
            let c7 = &criteria[6];
            let (o7, t7) = match &pre {
                Ok(p) => {
                    let t = Instant::now();
                    let o = guarded(|| pretraining_helps(p));
                    (o, p.elapsed + t.elapsed())
                }
                Err(_) => (Err("LaMa pre-training panicked".to_string()), Duration::ZERO),
            };
            all_ok &= report(c7, t7, o7);
        }
    }
    if !all_ok {
        std::process::exit(1);
    }
}
