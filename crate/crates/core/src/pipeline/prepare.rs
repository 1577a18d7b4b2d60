use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Command, RunDirectory};
use crate::ablation::{AblationData, RegionMaskSet};
use crate::config::{DatasetSource, ExperimentConfig};
use crate::data::{
    build_classification_dataset, build_inpainting_dataset, load_image_png, load_mask_png, read_manifest,
    save_image_png, save_mask_png, write_manifest, DatasetSplits, ManifestRecord, Sample, CLASSIFICATION_RATIOS,
    INPAINTING_RATIOS,
};
use crate::synthetic::{generate_dataset_with, SyntheticConfig};
use crate::{Error, Result};

const CLASSIFICATION: &str = "classification.csv";
const INPAINTING: &str = "inpainting.csv";
const REGIONS: &str = "regions.csv";

/// Row of the region manifest; `source_id` `*` applies to every image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub source_id: String,
    pub background_path: String,
    pub fish_path: String,
    pub pattern_path: String,
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

struct Prepared {
    inpainting: DatasetSplits,
    classification: DatasetSplits,
    regions: BTreeMap<String, RegionMaskSet>,
}

fn synthetic(cfg: &ExperimentConfig) -> Result<Prepared> {
    let d = &cfg.dataset;
    let mut sc = SyntheticConfig::new(d.n_individuals, d.n_per_individual, cfg.seed);
    sc.inpaint_per_individual = d.inpaint_per_individual;
    sc.size = d.size;
    let data = generate_dataset_with(&sc)?;
    let regions =
        data.classification.iter().map(|s| s.source_id.clone()).zip(data.classification_regions.iter().cloned()).collect();
    Ok(Prepared {
        inpainting: build_inpainting_dataset(data.inpainting_pairs(), cfg.seed)?,
        classification: build_classification_dataset(data.classification_triples(), cfg.seed)?,
        regions,
    })
}

fn from_manifests(cfg: &ExperimentConfig) -> Result<Prepared> {
    let d = &cfg.dataset;
    let size = Some(d.size);
    let cls_path = d.classification_manifest.as_ref().expect("validated");
    let base = manifest_dir(cls_path);
    let mut triples = Vec::new();
    for r in read_manifest(cls_path)? {
        let label = r.label.ok_or_else(|| {
            Error::Dataset(format!("{}: row `{}` has no label", cls_path.display(), r.source_id))
        })?;
        triples.push((load_image_png(resolve(&base, &r.image_path), size)?, label, r.source_id));
    }
    let inp_path = d.inpainting_manifest.as_ref().ok_or_else(|| {
        Error::Config("dataset.source = \"manifest\" needs dataset.inpainting_manifest".into())
    })?;
    let base = manifest_dir(inp_path);
    let mut pairs = Vec::new();
    for r in read_manifest(inp_path)? {
        let image = load_image_png(resolve(&base, &r.image_path), size)?;
        let mask = load_mask_png(resolve(&base, &r.mask_path), size)?;
        pairs.push((image, mask, r.source_id));
    }
    let mut regions = BTreeMap::new();
    if let Some(path) = &d.region_manifest {
        let base = manifest_dir(path);
        let mut reader = csv::Reader::from_path(path)?;
        for rec in reader.deserialize::<RegionRecord>() {
            let rec = rec?;
            let load = |p: &str| load_mask_png(resolve(&base, p), size);
            let set = RegionMaskSet::new(load(&rec.background_path)?, load(&rec.fish_path)?, load(&rec.pattern_path)?)?;
            regions.insert(rec.source_id, set);
        }
    }
    Ok(Prepared {
        inpainting: build_inpainting_dataset(pairs, cfg.seed)?,
        classification: build_classification_dataset(triples, cfg.seed)?,
        regions,
    })
}

/// Generates or imports the datasets, splits them and stores images,
/// masks, region masks and manifests under `data/`. Also snapshots the
/// configuration.
pub fn cmd_prepare_data(cfg: &ExperimentConfig, run: &RunDirectory) -> Result<()> {
    cfg.validate()?;
    let dir = run.data();
    RunDirectory::clear_marker(&dir)?;
    cfg.save(&run.config_path())?;
    let prepared = match cfg.dataset.source {
        DatasetSource::Synthetic => synthetic(cfg)?,
        DatasetSource::Manifest => from_manifests(cfg)?,
    };

    let mut rows = Vec::new();
    for (split, samples) in prepared.classification.iter_named() {
        for s in samples {
            let rel = format!("images/cls/{}.png", file_stem(&s.source_id));
            save_image_png(&s.image, dir.join(&rel))?;
            rows.push(ManifestRecord {
                image_path: rel,
                mask_path: String::new(),
                label: s.label,
                source_id: s.source_id.clone(),
                split: split.into(),
            });
        }
    }
    write_manifest(dir.join(CLASSIFICATION), &rows)?;

    let mut rows = Vec::new();
    for (split, samples) in prepared.inpainting.iter_named() {
        for s in samples {
            let stem = file_stem(&s.source_id);
            let (img, mask) = (format!("images/inp/{stem}.png"), format!("masks/inp/{stem}.png"));
            save_image_png(&s.image, dir.join(&img))?;
            save_mask_png(&s.mask, dir.join(&mask))?;
            rows.push(ManifestRecord {
                image_path: img,
                mask_path: mask,
                label: None,
                source_id: s.source_id.clone(),
                split: split.into(),
            });
        }
    }
    write_manifest(dir.join(INPAINTING), &rows)?;

    let region_path = dir.join(REGIONS);
    if prepared.regions.is_empty() {
        if region_path.exists() {
            std::fs::remove_file(&region_path).map_err(|e| Error::io(&region_path, e))?;
        }
    } else {
        let mut w = csv::Writer::from_path(&region_path)?;
        for (id, set) in &prepared.regions {
            let stem = file_stem(id);
            let rec = RegionRecord {
                source_id: id.clone(),
                background_path: format!("regions/{stem}_background.png"),
                fish_path: format!("regions/{stem}_fish.png"),
                pattern_path: format!("regions/{stem}_pattern.png"),
            };
            save_mask_png(&set.background, dir.join(&rec.background_path))?;
            save_mask_png(&set.fish, dir.join(&rec.fish_path))?;
            save_mask_png(&set.pattern, dir.join(&rec.pattern_path))?;
            w.serialize(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&region_path, e))?;
    }
    RunDirectory::mark_complete(&dir, Command::PrepareData)
}

fn load_splits(
    run: &RunDirectory,
    name: &str,
    ratios: [f64; 3],
    seed: u64,
    load: impl Fn(&Path, &ManifestRecord) -> Result<Sample>,
) -> Result<DatasetSplits> {
    let dir = run.data();
    RunDirectory::require(&dir, "prepared datasets", Command::PrepareData)?;
    let mut splits = DatasetSplits { train: Vec::new(), val: Vec::new(), test: Vec::new(), split_seed: seed, ratios };
    for r in read_manifest(dir.join(name))? {
        let sample = load(&dir, &r)?;
        match r.split.as_str() {
            "train" => splits.train.push(sample),
            "val" => splits.val.push(sample),
            "test" => splits.test.push(sample),
            _ => return Err(Error::Dataset(format!("{name}: row `{}` has no split", r.source_id))),
        }
    }
    Ok(splits)
}

pub fn load_classification(run: &RunDirectory, seed: u64) -> Result<DatasetSplits> {
    load_splits(run, CLASSIFICATION, CLASSIFICATION_RATIOS, seed, |dir, r| {
        let image = load_image_png(dir.join(&r.image_path), None)?;
        let label = r.label.ok_or_else(|| Error::Dataset(format!("row `{}` has no label", r.source_id)))?;
        Ok(Sample::classification(image, label, r.source_id.clone()))
    })
}

pub fn load_inpainting(run: &RunDirectory, seed: u64) -> Result<DatasetSplits> {
    load_splits(run, INPAINTING, INPAINTING_RATIOS, seed, |dir, r| {
        let image = load_image_png(dir.join(&r.image_path), None)?;
        let mask = load_mask_png(dir.join(&r.mask_path), None)?;
        Sample::new(image, mask, None, r.source_id.clone())
    })
}

fn load_regions(run: &RunDirectory) -> Result<BTreeMap<String, RegionMaskSet>> {
    let dir = run.data();
    let path = dir.join(REGIONS);
    if !path.exists() {
        return Err(Error::Dataset(format!(
            "{} is missing; the region ablation needs region masks (dataset.region_manifest)",
            path.display()
        )));
    }
    let mut out = BTreeMap::new();
    let mut reader = csv::Reader::from_path(&path)?;
    for rec in reader.deserialize::<RegionRecord>() {
        let rec = rec?;
        let load = |p: &str| load_mask_png(dir.join(p), None);
        out.insert(
            rec.source_id.clone(),
            RegionMaskSet::new(load(&rec.background_path)?, load(&rec.fish_path)?, load(&rec.pattern_path)?)?,
        );
    }
    Ok(out)
}

/// Classification images of `split` (or all splits) paired with their
/// region masks.
pub fn load_ablation_data(run: &RunDirectory, split: &str, seed: u64) -> Result<AblationData> {
    let splits = load_classification(run, seed)?;
    let samples: Vec<Sample> = match split {
        "train" => splits.train,
        "val" => splits.val,
        "test" => splits.test,
        _ => {
            let mut all: Vec<Sample> = splits.train.into_iter().chain(splits.val).chain(splits.test).collect();
            all.sort_by(|a, b| a.source_id.cmp(&b.source_id));
            all
        }
    };
    let regions = load_regions(run)?;
    if let Some(shared) = regions.get("*") {
        return AblationData::new(samples, vec![shared.clone()]);
    }
    let sets = samples
        .iter()
        .map(|s| {
            regions
                .get(&s.source_id)
                .cloned()
                .ok_or_else(|| Error::Dataset(format!("no region masks for `{}`", s.source_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    AblationData::new(samples, sets)
}
