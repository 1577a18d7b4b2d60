//! Dataset records, flip augmentation, and seeded train/val/test splitting.

mod io;
mod manifest;

pub use io::{load_image_png, load_mask_png, save_image_png, save_mask_png};
pub use manifest::{read_manifest, write_manifest, ManifestRecord};

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{check_shapes, ImageTensor, MaskTensor};
use crate::{Error, Result};

/// Inpainting split ratios (train:val:test).
pub const INPAINTING_RATIOS: [f64; 3] = [0.80, 0.16, 0.04];
/// Classification split ratios (train:val:test).
pub const CLASSIFICATION_RATIOS: [f64; 3] = [0.80, 0.10, 0.10];

/// Separator between a source id and its augmentation suffix.
const VARIANT_SEP: char = '#';

/// One image with its mask and, for classification data, an individual label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: ImageTensor,
    pub mask: MaskTensor,
    pub label: Option<usize>,
    pub source_id: String,
}

impl Sample {
    pub fn new(image: ImageTensor, mask: MaskTensor, label: Option<usize>, source_id: impl Into<String>) -> Result<Self> {
        check_shapes(&image, &mask)?;
        Ok(Self {
            image,
            mask,
            label,
            source_id: source_id.into(),
        })
    }

    /// Labeled sample paired with an all-zero mask.
    pub fn classification(image: ImageTensor, label: usize, source_id: impl Into<String>) -> Self {
        let mask = MaskTensor::zeros(image.height(), image.width());
        Self {
            image,
            mask,
            label: Some(label),
            source_id: source_id.into(),
        }
    }

    /// The id of the original image this sample was derived from.
    pub fn source_group(&self) -> &str {
        source_group(&self.source_id)
    }
}

pub fn source_group(id: &str) -> &str {
    id.split(VARIANT_SEP).next().unwrap_or(id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplits {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    pub split_seed: u64,
    pub ratios: [f64; 3],
}

impl DatasetSplits {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter_named(&self) -> impl Iterator<Item = (&'static str, &Vec<Sample>)> {
        [("train", &self.train), ("val", &self.val), ("test", &self.test)].into_iter()
    }
}

/// Original plus horizontal, vertical and combined flips, in that order.
/// Image and mask are flipped together; the label is carried along.
pub fn flip_augment(sample: &Sample) -> [Sample; 4] {
    let make = |image: ImageTensor, mask: MaskTensor, suffix: &str| Sample {
        image,
        mask,
        label: sample.label,
        source_id: if suffix.is_empty() {
            sample.source_id.clone()
        } else {
            format!("{}{VARIANT_SEP}{suffix}", sample.source_id)
        },
    };
    let h_img = sample.image.flip_horizontal();
    let h_mask = sample.mask.flip_horizontal();
    [
        make(sample.image.clone(), sample.mask.clone(), ""),
        make(h_img.clone(), h_mask.clone(), "h"),
        make(sample.image.flip_vertical(), sample.mask.flip_vertical(), "v"),
        make(h_img.flip_vertical(), h_mask.flip_vertical(), "hv"),
    ]
}

fn check_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Dataset(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    Ok(())
}

/// Largest-remainder apportionment of `n` items to the three splits.
pub fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, q) in counts.iter_mut().zip(&quotas) {
        *c = q.floor() as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Per-class split counts whose rows sum to the class sizes, whose columns
/// match the global apportionment, and where every cell is the floor or
/// ceiling of its quota (controlled rounding).
fn stratified_counts(class_sizes: &[usize], ratios: [f64; 3]) -> Vec<[usize; 3]> {
    let total: usize = class_sizes.iter().sum();
    let targets = apportion(total, ratios);
    let mut cells: Vec<[usize; 3]> = Vec::with_capacity(class_sizes.len());
    let mut row_left = Vec::with_capacity(class_sizes.len());
    let mut fractions = Vec::with_capacity(class_sizes.len());
    for &n in class_sizes {
        let q: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
        let base = [q[0].floor() as usize, q[1].floor() as usize, q[2].floor() as usize];
        row_left.push(n - base.iter().sum::<usize>());
        fractions.push([q[0] - q[0].floor(), q[1] - q[1].floor(), q[2] - q[2].floor()]);
        cells.push(base);
    }
    let mut col_left: Vec<isize> = (0..3)
        .map(|s| targets[s] as isize - cells.iter().map(|c| c[s] as isize).sum::<isize>())
        .collect();

    // Gale-Ryser style greedy: rows with most leftover first, each taking the
    // columns with the most remaining demand.
    let mut rows: Vec<usize> = (0..class_sizes.len()).collect();
    rows.sort_by(|&a, &b| row_left[b].cmp(&row_left[a]).then(a.cmp(&b)));
    for r in rows {
        let mut cols = [0usize, 1, 2];
        cols.sort_by(|&a, &b| {
            col_left[b]
                .cmp(&col_left[a])
                .then(fractions[r][b].total_cmp(&fractions[r][a]))
                .then(a.cmp(&b))
        });
        for &c in cols.iter().take(row_left[r]) {
            cells[r][c] += 1;
            col_left[c] -= 1;
        }
    }
    cells
}

fn check_unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Dataset(format!("duplicate source_id `{id}`")));
        }
    }
    Ok(())
}

/// Flip-augments image/mask pairs, drops labels, and splits 80:16:4.
///
/// Splitting happens per source image so that all four flips of one image
/// land in the same split.
pub fn build_inpainting_dataset(pairs: Vec<(ImageTensor, MaskTensor, String)>, seed: u64) -> Result<DatasetSplits> {
    build_inpainting_dataset_with(pairs, INPAINTING_RATIOS, seed)
}

pub fn build_inpainting_dataset_with(
    pairs: Vec<(ImageTensor, MaskTensor, String)>,
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplits> {
    check_ratios(ratios)?;
    if pairs.is_empty() {
        return Err(Error::Dataset("no inpainting pairs".into()));
    }
    check_unique_ids(pairs.iter().map(|p| p.2.as_str()))?;
    let mut samples = Vec::with_capacity(pairs.len());
    for (image, mask, id) in pairs {
        if mask.is_empty_mask() {
            return Err(Error::Dataset(format!("inpainting mask of `{id}` is empty")));
        }
        samples.push(Sample::new(image, mask, None, id)?);
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let counts = apportion(samples.len(), ratios);

    let mut splits: [Vec<Sample>; 3] = Default::default();
    let mut cursor = 0;
    for (s, &count) in counts.iter().enumerate() {
        for &i in &order[cursor..cursor + count] {
            splits[s].extend(flip_augment(&samples[i]));
        }
        cursor += count;
    }
    let [train, val, test] = splits;
    Ok(DatasetSplits {
        train,
        val,
        test,
        split_seed: seed,
        ratios,
    })
}

/// Pairs each labeled image with an all-zero mask and splits 80:10:10,
/// stratified by label.
pub fn build_classification_dataset(samples: Vec<(ImageTensor, usize, String)>, seed: u64) -> Result<DatasetSplits> {
    build_classification_dataset_with(samples, CLASSIFICATION_RATIOS, seed)
}

pub fn build_classification_dataset_with(
    samples: Vec<(ImageTensor, usize, String)>,
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplits> {
    check_ratios(ratios)?;
    if samples.is_empty() {
        return Err(Error::Dataset("no classification samples".into()));
    }
    check_unique_ids(samples.iter().map(|s| s.2.as_str()))?;
    let k = samples.iter().map(|s| s.1).max().expect("non-empty") + 1;
    let mut by_class: BTreeMap<usize, Vec<Sample>> = (0..k).map(|c| (c, Vec::new())).collect();
    for (image, label, id) in samples {
        by_class.get_mut(&label).expect("label < k").push(Sample::classification(image, label, id));
    }
    if let Some((c, _)) = by_class.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::Dataset(format!(
            "class {c} has no samples; labels must form the contiguous range 0..{}",
            k - 1
        )));
    }

    let sizes: Vec<usize> = by_class.values().map(Vec::len).collect();
    let counts = stratified_counts(&sizes, ratios);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits: [Vec<Sample>; 3] = Default::default();
    for (class_samples, class_counts) in by_class.into_values().zip(&counts) {
        let mut members = class_samples;
        members.shuffle(&mut rng);
        let mut it = members.into_iter();
        for (s, &count) in class_counts.iter().enumerate() {
            splits[s].extend(it.by_ref().take(count));
        }
    }
    for split in splits.iter_mut() {
        split.shuffle(&mut rng);
    }
    let [train, val, test] = splits;
    Ok(DatasetSplits {
        train,
        val,
        test,
        split_seed: seed,
        ratios,
    })
}

/// Number of distinct classes (max label + 1) over labeled samples.
pub fn class_count(samples: &[Sample]) -> usize {
    samples.iter().filter_map(|s| s.label).max().map_or(0, |m| m + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(id: usize) -> (ImageTensor, MaskTensor, String) {
        let img = ImageTensor::from_fn(4, 4, 3, |y, x, c| ((y * 4 + x + c + id) % 7) as f32 / 7.0);
        let mask = MaskTensor::from_fn(4, 4, |y, x| y == 1 && x >= 1);
        (img, mask, format!("s{id}"))
    }

    #[test]
    fn flips_are_distinct_and_involutive() {
        let img = ImageTensor::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let s = Sample::classification(img.clone(), 0, "a");
        let flips = flip_augment(&s);
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert_ne!(flips[i].image, flips[j].image);
            }
        }
        let twice = flip_augment(&flips[3])[3].image.clone();
        assert_eq!(twice, img);
        let mut sorted: Vec<u32> = flips[3].image.data().iter().map(|v| v.to_bits()).collect();
        let mut orig: Vec<u32> = img.data().iter().map(|v| v.to_bits()).collect();
        sorted.sort();
        orig.sort();
        assert_eq!(sorted, orig);
        assert!(flips.iter().all(|f| f.label == Some(0) && f.source_group() == "a"));
    }

    #[test]
    fn published_dataset_sizes_apportion() {
        assert_eq!(apportion(999, INPAINTING_RATIOS).map(|c| c * 4), [3196, 640, 160]);
        assert_eq!(apportion(4422, CLASSIFICATION_RATIOS), [3538, 442, 442]);
    }

    #[test]
    fn stratified_counts_respect_margins() {
        let sizes = [737, 737, 737, 737, 737, 737];
        let cells = stratified_counts(&sizes, CLASSIFICATION_RATIOS);
        let totals: Vec<usize> = (0..3).map(|s| cells.iter().map(|c| c[s]).sum()).collect();
        assert_eq!(totals, vec![3538, 442, 442]);
        for (row, &n) in cells.iter().zip(&sizes) {
            assert_eq!(row.iter().sum::<usize>(), n);
            for s in 0..3 {
                assert!((row[s] as f64 - n as f64 * CLASSIFICATION_RATIOS[s]).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn inpainting_groups_stay_together() {
        let pairs: Vec<_> = (0..10).map(tiny).collect();
        let splits = build_inpainting_dataset(pairs, 3).unwrap();
        assert_eq!(splits.len(), 40);
        let groups = |v: &Vec<Sample>| v.iter().map(|s| s.source_group().to_string()).collect::<HashSet<_>>();
        let (a, b, c) = (groups(&splits.train), groups(&splits.val), groups(&splits.test));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        assert!(splits.train.iter().all(|s| s.label.is_none()));
    }

    #[test]
    fn inpainting_rejects_bad_input() {
        assert!(build_inpainting_dataset(vec![], 0).is_err());
        let mut pairs = vec![tiny(0), tiny(0)];
        assert!(build_inpainting_dataset(pairs.clone(), 0).unwrap_err().to_string().contains("duplicate"));
        pairs[1] = (pairs[1].0.clone(), MaskTensor::zeros(4, 4), "x".into());
        assert!(build_inpainting_dataset(pairs, 0).unwrap_err().to_string().contains("empty"));
    }

    #[test]
    fn seeds_change_membership() {
        let pairs: Vec<_> = (0..10).map(tiny).collect();
        let a = build_inpainting_dataset(pairs.clone(), 0).unwrap();
        let b = build_inpainting_dataset(pairs.clone(), 1).unwrap();
        let again = build_inpainting_dataset(pairs, 0).unwrap();
        assert_eq!(a, again);
        let ids = |s: &DatasetSplits| s.train.iter().map(|x| x.source_id.clone()).collect::<Vec<_>>();
        assert_ne!(ids(&a), ids(&b));
    }

    #[test]
    fn classification_is_stratified() {
        let samples: Vec<_> = (0..60)
            .map(|i| (ImageTensor::zeros(2, 2, 3), i % 6, format!("c{i}")))
            .collect();
        let splits = build_classification_dataset(samples, 9).unwrap();
        assert_eq!((splits.train.len(), splits.val.len(), splits.test.len()), (48, 6, 6));
        for (_, split) in splits.iter_named() {
            let mut per_class = [0usize; 6];
            for s in split {
                per_class[s.label.unwrap()] += 1;
                assert!(s.mask.is_empty_mask());
            }
            let expected = split.len() as f64 / 6.0;
            assert!(per_class.iter().all(|&c| (c as f64 - expected).abs() <= 1.0));
        }
    }

    #[test]
    fn missing_class_is_named() {
        let samples = vec![
            (ImageTensor::zeros(2, 2, 3), 0, "a".to_string()),
            (ImageTensor::zeros(2, 2, 3), 2, "b".to_string()),
        ];
        let err = build_classification_dataset(samples, 0).unwrap_err().to_string();
        assert!(err.contains("class 1"), "{err}");
    }
}
