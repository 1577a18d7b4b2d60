use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::plot::{image_grid, line_plot, Series, PALETTE};
use super::stages::ClassifierSummary;
use super::{write_text, Command, RunDirectory};
use crate::config::ExperimentConfig;
use crate::data::{load_image_png, save_image_png};
use crate::tensor::ImageTensor;
use crate::{Error, Result};

#[derive(Deserialize)]
struct MetricRow {
    epoch: usize,
    split: String,
    accuracy: f64,
    recall: f64,
    f1: f64,
}

const METRICS: [&str; 3] = ["accuracy", "recall", "f1"];
const SPLITS: [&str; 2] = ["val", "test"];

fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn copy(from: &Path, to: &Path) -> Result<bool> {
    if !from.is_file() {
        return Ok(false);
    }
    std::fs::copy(from, to).map_err(|e| Error::io(to, e))?;
    Ok(true)
}

/// Highest epoch among `e<epoch>_id<class>[_j].png` files in `dir`.
fn latest_gradcam_epoch(dir: &Path) -> Option<usize> {
    std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| {
            let name = e.ok()?.file_name().into_string().ok()?;
            name.strip_prefix('e')?.split_once("_id")?.0.parse().ok()
        })
        .max()
}

fn gradcam_row(dir: &Path, epoch: usize) -> Result<Vec<ImageTensor>> {
    let mut row = Vec::new();
    for class in 0.. {
        let single = dir.join(format!("e{epoch}_id{class}.png"));
        let first = dir.join(format!("e{epoch}_id{class}_0.png"));
        let path = if single.is_file() { single } else { first };
        if !path.is_file() {
            break;
        }
        row.push(load_image_png(&path, None)?);
    }
    Ok(row)
}

/// Collates curves, tables and image grids of a run into `report/`. Missing
/// pieces are listed in `report/README.txt` rather than failing; a run
/// directory with nothing in it is an error.
pub fn cmd_report(run: &RunDirectory) -> Result<()> {
    let cfg_path = run.config_path();
    if !cfg_path.is_file() {
        return Err(Error::MissingPrerequisite {
            what: format!("run directory contents ({})", run.root().display()),
            command: Command::PrepareData.name(),
        });
    }
    let cfg = ExperimentConfig::load(&cfg_path)?;
    let out = run.report();
    if out.exists() {
        std::fs::remove_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    }
    RunDirectory::ensure(&out.join("curves"))?;
    let mut gaps = Vec::new();
    let mut produced = Vec::new();

    // Per-epoch classification curves, one series per trained (arch, mode).
    let mut runs = Vec::new();
    let mut summary = String::from("arch,mode,best_epoch,test_accuracy,test_recall,test_f1\n");
    for &arch in &cfg.archs {
        for &mode in &cfg.modes {
            let dir = run.classifier(arch, mode);
            if !RunDirectory::is_complete(&dir) {
                gaps.push(format!("classifier {arch}/{mode}: run `train-classifier`"));
                continue;
            }
            runs.push((arch, mode, read_metrics(&dir.join("metrics.csv"))?));
            let s = ClassifierSummary::read(&dir.join("summary.json"))?;
            match &s.test {
                Some(t) => writeln!(summary, "{arch},{mode},{},{},{},{}", s.best_epoch, t.accuracy, t.macro_recall, t.macro_f1),
                None => writeln!(summary, "{arch},{mode},{},,,", s.best_epoch),
            }
            .expect("write to string");
        }
    }
    if !runs.is_empty() {
        let mut long = String::from("arch,mode,epoch,split,accuracy,recall,f1\n");
        for (arch, mode, rows) in &runs {
            for r in rows {
                writeln!(long, "{arch},{mode},{},{},{},{},{}", r.epoch, r.split, r.accuracy, r.recall, r.f1)
                    .expect("write to string");
            }
        }
        write_text(&out.join("curves/curves.csv"), &long)?;
        write_text(&out.join("metrics_summary.csv"), &summary)?;
        for split in SPLITS {
            for (mi, metric) in METRICS.iter().enumerate() {
                let series: Vec<Series> = runs
                    .iter()
                    .map(|(arch, mode, rows)| Series {
                        name: format!("{arch} {mode}"),
                        points: rows
                            .iter()
                            .filter(|r| r.split == split)
                            .map(|r| (r.epoch as f64, [r.accuracy, r.recall, r.f1][mi]))
                            .collect(),
                    })
                    .collect();
                let stem = format!("{metric}_{split}");
                line_plot(&series, Some((0.0, 1.0)), &out.join(format!("curves/{stem}.png")))?;
                let mut legend = format!("{metric} per epoch, {split} split; x = epoch, y in [0, 1]\n");
                for (i, s) in series.iter().enumerate() {
                    let [r, g, b] = PALETTE[i % PALETTE.len()];
                    writeln!(legend, "#{r:02x}{g:02x}{b:02x} {}", s.name).expect("write to string");
                }
                write_text(&out.join(format!("curves/{stem}.txt")), &legend)?;
                produced.push(format!("curves/{stem}.png"));
            }
        }
    }

    let ablation = run.ablation();
    if RunDirectory::is_complete(&ablation) {
        copy(&ablation.join("ablation.csv"), &out.join("ablation.csv"))?;
        copy(&ablation.join("ablation.txt"), &out.join("ablation.txt"))?;
        produced.push("ablation.csv".into());
    } else {
        gaps.push("ablation table: run `ablate`".into());
    }

    let clustering = run.clustering();
    if RunDirectory::is_complete(&clustering) {
        copy(&clustering.join("clustering.csv"), &out.join("clustering.csv"))?;
        produced.push("clustering.csv".into());
    } else {
        gaps.push("clustering table: run `cluster-eval`".into());
    }

    // Grad-CAM grid: one row per (arch, mode), one column per class.
    let mut cam_rows = Vec::new();
    let mut cam_legend = String::from("rows of gradcam.png (columns are classes 0, 1, ...)\n");
    for &arch in &cfg.archs {
        for &mode in &cfg.modes {
            let dir = run.gradcam(arch, mode);
            let Some(epoch) = latest_gradcam_epoch(&dir) else {
                gaps.push(format!("gradcam {arch}/{mode}: run `train-classifier` or `gradcam`"));
                continue;
            };
            let row = gradcam_row(&dir, epoch)?;
            if !row.is_empty() {
                writeln!(cam_legend, "{arch} {mode}, epoch {epoch}").expect("write to string");
                cam_rows.push(row);
            }
        }
    }
    if !cam_rows.is_empty() {
        save_image_png(&image_grid(&cam_rows)?, out.join("gradcam.png"))?;
        write_text(&out.join("gradcam.txt"), &cam_legend)?;
        produced.push("gradcam.png".into());
    }

    // Inpainting samples stacked per architecture.
    let mut inp_rows = Vec::new();
    let mut inp_legend = String::from("blocks of inpainting.png (columns: masked input, output, original)\n");
    for &arch in &cfg.archs {
        let path = run.inpaint(arch).join("samples.png");
        if RunDirectory::is_complete(&run.inpaint(arch)) && path.is_file() {
            inp_rows.push(vec![load_image_png(&path, None)?]);
            writeln!(inp_legend, "{arch}").expect("write to string");
        } else {
            gaps.push(format!("inpainting {arch}: run `train-inpaint`"));
        }
    }
    if same_size(&inp_rows) {
        save_image_png(&image_grid(&inp_rows)?, out.join("inpainting.png"))?;
        write_text(&out.join("inpainting.txt"), &inp_legend)?;
        produced.push("inpainting.png".into());
    }

    let mut readme = format!("Report for {}\n\nContents:\n", run.root().display());
    for p in &produced {
        writeln!(readme, "  {p}").expect("write to string");
    }
    if gaps.is_empty() {
        readme.push_str("\nComplete: every expected artifact is present.\n");
    } else {
        readme.push_str("\nGaps (the report is partial):\n");
        for g in &gaps {
            writeln!(readme, "  {g}").expect("write to string");
        }
    }
    write_text(&out.join("README.txt"), &readme)?;
    if gaps.is_empty() {
        RunDirectory::mark_complete(&out, Command::Report)?;
    }
    Ok(())
}

fn same_size(rows: &[Vec<ImageTensor>]) -> bool {
    let mut shapes = rows.iter().flatten().map(ImageTensor::shape);
    match shapes.next() {
        Some(first) => shapes.all(|s| s == first),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_gradcam_epochs() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["e1_id0.png", "e12_id3_1.png", "meta.json", "e3_id0.png"] {
            std::fs::write(dir.path().join(f), b"").unwrap();
        }
        assert_eq!(latest_gradcam_epoch(dir.path()), Some(12));
        assert_eq!(latest_gradcam_epoch(&dir.path().join("missing")), None);
    }

    #[test]
    fn empty_run_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_report(&RunDirectory::new(dir.path())).unwrap_err();
        assert!(matches!(err, Error::MissingPrerequisite { .. }), "{err}");
    }
}
