use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::plot::{image_grid, scatter_plot};
use super::prepare::{load_ablation_data, load_classification, load_inpainting};
use super::{write_text, Command, RunDirectory, Selection};
use crate::ablation::{render_ablation_report, run_ablation, AblationSchedule, BackboneEntry};
use crate::classifier::{
    attach_head, train_classifier, ClassificationMetrics, ClassifierModel, ClassifierSchedule, EpochRecord, EvalSplit,
    TrainMode,
};
use crate::config::ExperimentConfig;
use crate::data::{class_count, save_image_png, DatasetSplits, Sample};
use crate::encoder::{embed_dataset, isolate_encoder, Backbone, Encoder};
use crate::explain::{gradcam, overlay, Heatmap, COLORMAP};
use crate::inpaint::{build_model, train_inpainting, Arch, InpaintingModel};
use crate::tensor::apply_mask;
use crate::{Error, Result};
use patreid_analytics::{
    clustering_report, kmeans, project2d, standardize, write_cluster_table, ProjectionMethod, ProjectionParams,
};

/// Validation images shown in `inpaint/<arch>/samples.png`.
const INPAINT_SAMPLES: usize = 4;

fn image_size(splits: &DatasetSplits) -> Result<(usize, usize)> {
    let s = splits
        .train
        .first()
        .ok_or_else(|| Error::Dataset("the train split is empty".into()))?;
    Ok((s.image.height(), s.image.width()))
}

fn best_checkpoint(run: &RunDirectory, arch: Arch) -> Result<PathBuf> {
    let dir = run.inpaint(arch);
    RunDirectory::require(&dir, &format!("{arch} inpainting checkpoint"), Command::TrainInpaint)?;
    Ok(dir.join("best.safetensors"))
}

/// Encoder of the best inpainting checkpoint of `arch`.
fn pretrained_encoder(run: &RunDirectory, arch: Arch, size: (usize, usize)) -> Result<Encoder> {
    let (model, _) = InpaintingModel::load_checkpoint(&best_checkpoint(run, arch)?)?;
    isolate_encoder(&model, size)
}

/// Rows of masked input, inpainted output and original.
fn inpainting_samples(model: &InpaintingModel, samples: &[Sample], path: &Path) -> Result<()> {
    let picked: Vec<&Sample> = samples.iter().take(INPAINT_SAMPLES).collect();
    if picked.is_empty() {
        return Ok(());
    }
    let images: Vec<_> = picked.iter().map(|s| &s.image).collect();
    let masks: Vec<_> = picked.iter().map(|s| &s.mask).collect();
    let out = model.inpaint_batch(&images, &masks)?;
    let rows = picked
        .iter()
        .zip(out)
        .map(|(s, o)| Ok(vec![apply_mask(&s.image, &s.mask)?, o, s.image.clone()]))
        .collect::<Result<Vec<_>>>()?;
    save_image_png(&image_grid(&rows)?, path)
}

/// Pre-trains each selected architecture on the inpainting split and keeps
/// the best validation checkpoint.
pub fn cmd_train_inpaint(cfg: &ExperimentConfig, run: &RunDirectory, sel: &Selection) -> Result<()> {
    let splits = load_inpainting(run, cfg.seed)?;
    for &arch in &sel.archs {
        let dir = run.inpaint(arch);
        RunDirectory::clear_marker(&dir)?;
        let mut model = build_model(arch, &cfg.arch_config(arch), cfg.seed)?;
        let log = train_inpainting(&mut model, &splits, &cfg.inpainting, Some(&dir))?;
        if let Some(best) = log.best_checkpoint {
            log::info!("{arch}: best validation loss {:.4} at iteration {}", best.val_total_loss, best.iteration);
        }
        inpainting_samples(&model, &splits.val, &dir.join("samples.png"))?;
        RunDirectory::mark_complete(&dir, Command::TrainInpaint)?;
    }
    Ok(())
}

/// Best epoch and its test metrics, stored as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSummary {
    pub backbone: Backbone,
    pub mode: TrainMode,
    pub epochs: usize,
    pub best_epoch: usize,
    pub test: Option<ClassificationMetrics>,
}

impl ClassifierSummary {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// The first `per_class` test images of every class.
fn gradcam_subjects(test: &[Sample], classes: usize, per_class: usize) -> Vec<(usize, usize, &Sample)> {
    let mut out = Vec::new();
    for class in 0..classes {
        let picks = test.iter().filter(|s| s.label == Some(class)).take(per_class);
        out.extend(picks.enumerate().map(|(j, s)| (class, j, s)));
    }
    out
}

fn gradcam_file(epoch: usize, class: usize, j: usize, per_class: usize) -> String {
    if per_class > 1 {
        format!("e{epoch}_id{class}_{j}.png")
    } else {
        format!("e{epoch}_id{class}.png")
    }
}

/// Grad-CAM overlays for the subjects at `epoch`, targeting the true label.
fn write_gradcams(
    clf: &ClassifierModel,
    subjects: &[(usize, usize, &Sample)],
    epoch: usize,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<()> {
    for &(class, j, s) in subjects {
        let mut map: Heatmap = gradcam(clf, &s.image, Some(class), None)?;
        map.epoch = epoch;
        let img = overlay(&map, &s.image, cfg.gradcam.alpha)?;
        save_image_png(&img, dir.join(gradcam_file(epoch, class, j, cfg.gradcam.per_class)))?;
    }
    Ok(())
}

fn write_gradcam_meta(clf: &ClassifierModel, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let meta = serde_json::json!({
        "colormap": COLORMAP,
        "alpha": cfg.gradcam.alpha,
        "layer": crate::explain::default_layer(clf),
        "target": "true label",
    });
    write_text(&dir.join("meta.json"), &serde_json::to_string_pretty(&meta)?)
}

/// Fine-tunes a classifier on every selected architecture and mode. Each
/// epoch also evaluates the test split (for the curves only; the kept
/// parameters are chosen on validation accuracy) and renders Grad-CAM
/// overlays.
pub fn cmd_train_classifier(cfg: &ExperimentConfig, run: &RunDirectory, sel: &Selection) -> Result<()> {
    let splits = load_classification(run, cfg.seed)?;
    let size = image_size(&splits)?;
    let classes = class_count(&splits.train).max(class_count(&splits.val)).max(class_count(&splits.test));
    let subjects = gradcam_subjects(&splits.test, classes, cfg.gradcam.per_class);
    for &arch in &sel.archs {
        let encoder = pretrained_encoder(run, arch, size)?;
        for &mode in &sel.modes {
            let dir = run.classifier(arch, mode);
            let cam_dir = run.gradcam(arch, mode);
            RunDirectory::clear_marker(&dir)?;
            RunDirectory::clear_marker(&cam_dir)?;
            let mut clf = attach_head(encoder.deep_copy()?, classes, cfg.classifier.seed)?;
            write_gradcam_meta(&clf, cfg, &cam_dir)?;
            let mut tests = Vec::new();
            let mut observer = |epoch: usize, clf: &ClassifierModel| -> Result<()> {
                if !splits.test.is_empty() {
                    tests.push(EpochRecord { epoch, split: EvalSplit::Test, metrics: clf.evaluate(&splits.test)? });
                }
                write_gradcams(clf, &subjects, epoch, cfg, &cam_dir)
            };
            let mut log = train_classifier(&mut clf, &splits, mode, &cfg.classifier, Some(&mut observer))?;
            let summary = ClassifierSummary {
                backbone: arch.into(),
                mode,
                epochs: cfg.classifier.epochs,
                best_epoch: log.best_epoch,
                test: log.test.take(),
            };
            log.records.extend(tests);
            log.records.sort_by_key(|r| r.epoch);
            log.write_csv(&dir.join("metrics.csv"))?;
            write_text(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
            clf.save(&dir.join("model.safetensors"))?;
            RunDirectory::mark_complete(&dir, Command::TrainClassifier)?;
            RunDirectory::mark_complete(&cam_dir, Command::TrainClassifier)?;
        }
    }
    Ok(())
}

fn load_classifier(run: &RunDirectory, arch: Arch, mode: TrainMode) -> Result<(ClassifierModel, ClassifierSummary)> {
    let dir = run.classifier(arch, mode);
    RunDirectory::require(&dir, &format!("{arch} {mode} classifier"), Command::TrainClassifier)?;
    Ok((ClassifierModel::load(&dir.join("model.safetensors"))?, ClassifierSummary::read(&dir.join("summary.json"))?))
}

/// Renders Grad-CAM overlays of the kept classifiers, labelled with their
/// selected epoch.
pub fn cmd_gradcam(cfg: &ExperimentConfig, run: &RunDirectory, sel: &Selection) -> Result<()> {
    let splits = load_classification(run, cfg.seed)?;
    for &arch in &sel.archs {
        for &mode in &sel.modes {
            let (clf, summary) = load_classifier(run, arch, mode)?;
            let dir = run.gradcam(arch, mode);
            let subjects = gradcam_subjects(&splits.test, clf.classes(), cfg.gradcam.per_class);
            write_gradcams(&clf, &subjects, summary.best_epoch, cfg, &dir)?;
            write_gradcam_meta(&clf, cfg, &dir)?;
            RunDirectory::mark_complete(&dir, Command::Gradcam)?;
        }
    }
    Ok(())
}

/// Region ablation over the configured backbones. Architectures without an
/// inpainting checkpoint, or outside the selection, are reported as skipped.
pub fn cmd_ablate(cfg: &ExperimentConfig, run: &RunDirectory, sel: &Selection) -> Result<()> {
    let data = load_ablation_data(run, &cfg.ablation.split, cfg.seed)?;
    let first = &data.samples()[0].image;
    let size = (first.height(), first.width());
    let mut entries = Vec::new();
    for &backbone in &cfg.ablation.backbones {
        let encoder = match backbone {
            Backbone::Inpainting(arch) if !sel.archs.contains(&arch) => Err("not selected".to_string()),
            Backbone::Inpainting(arch) => match pretrained_encoder(run, arch, size) {
                Ok(e) => Ok(e),
                Err(e @ Error::MissingPrerequisite { .. }) => Err(e.to_string()),
                Err(e) => return Err(e),
            },
            Backbone::Baseline => Ok(Encoder::baseline(cfg.arch_config(Arch::Lama), cfg.seed, size)?),
        };
        entries.push(BackboneEntry { backbone, encoder });
    }
    let schedule = AblationSchedule {
        classifier: ClassifierSchedule { epochs: cfg.ablation.epochs, ..cfg.classifier.clone() },
        per_class: cfg.ablation.per_class,
        split_seed: cfg.seed,
    };
    let dir = run.ablation();
    RunDirectory::clear_marker(&dir)?;
    let table = run_ablation(&entries, &sel.modes, &data, &schedule)?;
    render_ablation_report(&table).write(&dir)?;
    RunDirectory::mark_complete(&dir, Command::Ablate)
}

/// k-means on test-split embeddings of the frozen (after inpainting) and
/// refined (after deep fine-tuning) encoders, plus 2D projections.
pub fn cmd_cluster_eval(cfg: &ExperimentConfig, run: &RunDirectory, sel: &Selection) -> Result<()> {
    let splits = load_classification(run, cfg.seed)?;
    if splits.test.is_empty() {
        return Err(Error::Dataset("clustering needs a non-empty test split".into()));
    }
    let size = image_size(&splits)?;
    let truth: Vec<usize> = splits.test.iter().map(|s| s.label.expect("classification samples are labelled")).collect();
    let out = run.clustering();
    RunDirectory::clear_marker(&out)?;
    let mut reports = Vec::new();
    for &arch in &sel.archs {
        let frozen = pretrained_encoder(run, arch, size)?;
        let (refined, _) = load_classifier(run, arch, TrainMode::Deep)?;
        let dir = run.embeddings(arch);
        for (name, file, encoder) in
            [(arch.name().to_string(), "frozen.csv", &frozen), (format!("ref-{arch}"), "refined.csv", refined.encoder())]
        {
            let emb = embed_dataset(encoder, &splits.test)?;
            emb.save_csv(&dir.join(file))?;
            let mut x = emb.to_f64();
            if cfg.clustering.standardize {
                x = standardize(x.view());
            }
            let fit = kmeans(x.view(), cfg.clustering.k, cfg.seed)?;
            let report = clustering_report(x.view(), &fit.assignments, &truth, cfg.clustering.k)?;
            for method in &cfg.clustering.projections {
                let proj = project2d(x.view(), method.parse::<ProjectionMethod>()?, &ProjectionParams::default(), cfg.seed)?;
                let points: Vec<(f64, f64)> = proj.points.outer_iter().map(|r| (r[0], r[1])).collect();
                scatter_plot(&points, &truth, &out.join(format!("{name}_{method}.png")))?;
            }
            reports.push((name, report));
        }
        RunDirectory::mark_complete(&dir, Command::ClusterEval)?;
    }
    let rows: Vec<(String, &_)> = reports.iter().map(|(n, r)| (n.clone(), r)).collect();
    let path = out.join("clustering.csv");
    let mut buf = Vec::new();
    write_cluster_table(&rows, &mut buf)?;
    write_text(&path, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    RunDirectory::mark_complete(&out, Command::ClusterEval)
}
