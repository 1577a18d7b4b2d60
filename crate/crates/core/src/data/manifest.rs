//! Dataset manifest: CSV with header `image_path,mask_path,label,source_id,split`.
//! `label` is empty for unlabeled (inpainting) rows; `split` is one of
//! `train`, `val`, `test`, or empty when the manifest has not been split yet.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_path: String,
    pub mask_path: String,
    pub label: Option<usize>,
    pub source_id: String,
    pub split: String,
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::Dataset(format!("manifest {} does not exist", path.display())));
    }
    let mut r = csv::Reader::from_path(path)?;
    let records = r.deserialize().collect::<std::result::Result<Vec<ManifestRecord>, _>>()?;
    for rec in &records {
        if !matches!(rec.split.as_str(), "" | "train" | "val" | "test") {
            return Err(Error::Dataset(format!(
                "manifest {}: row `{}` has unknown split `{}`",
                path.display(),
                rec.source_id,
                rec.split
            )));
        }
    }
    Ok(records)
}
