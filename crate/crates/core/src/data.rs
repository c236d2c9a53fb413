//! Image datasets: IDX ingestion and export, imbalance injection, test-set
//! construction, stratified folds and [-1, 1] normalisation.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::tensor::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Training counts per class for MNIST / Fashion-MNIST, majority first.
pub const MNIST_TRAIN_COUNTS: [usize; 10] = [4000, 2000, 1000, 750, 500, 350, 200, 100, 60, 40];
pub const MNIST_BALANCED_TEST: [usize; 10] = [1200; 10];
pub const MNIST_IMBALANCED_TEST: [usize; 10] = [1000, 500, 250, 187, 125, 87, 50, 25, 15, 10];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic at offset 0: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: truncated at byte offset {offset}: {detail}")]
    Truncated {
        path: PathBuf,
        offset: usize,
        detail: String,
    },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("class {class}: requested {requested} samples but only {available} available")]
    Infeasible {
        class: usize,
        requested: usize,
        available: usize,
    },
    #[error("class {class} has {size} members, fewer than the {k} folds requested")]
    ClassTooSmall { class: usize, size: usize, k: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

/// Which pool a sample was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Synthetic,
}

/// Provenance of one sample: its pool and index within that pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleId {
    pub split: Split,
    pub index: u32,
}

/// `N × C × H × W` 8-bit images with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    channels: usize,
    height: usize,
    width: usize,
    class_count: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
    ids: Vec<SampleId>,
}

impl ImageDataset {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        class_count: usize,
        pixels: Vec<u8>,
        labels: Vec<u8>,
        split: Split,
    ) -> Result<Self, DataError> {
        let ids = (0..labels.len() as u32)
            .map(|index| SampleId { split, index })
            .collect();
        Self::with_ids(channels, height, width, class_count, pixels, labels, ids)
    }

    pub fn with_ids(
        channels: usize,
        height: usize,
        width: usize,
        class_count: usize,
        pixels: Vec<u8>,
        labels: Vec<u8>,
        ids: Vec<SampleId>,
    ) -> Result<Self, DataError> {
        if !matches!(channels, 1 | 3) || height == 0 || width == 0 {
            return Err(DataError::Invalid(format!(
                "unsupported image shape {channels}x{height}x{width}"
            )));
        }
        if labels.is_empty() {
            return Err(DataError::Invalid("dataset must hold at least one image".into()));
        }
        if pixels.len() != labels.len() * channels * height * width {
            return Err(DataError::CountMismatch {
                images: pixels.len() / (channels * height * width),
                labels: labels.len(),
            });
        }
        if ids.len() != labels.len() {
            return Err(DataError::Invalid("one provenance id per sample required".into()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= class_count) {
            return Err(DataError::Invalid(format!("label {l} outside {class_count} classes")));
        }
        Ok(Self {
            channels,
            height,
            width,
            class_count,
            pixels,
            labels,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l as usize).collect()
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn members(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.label(i) == class).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self, DataError> {
        let mut pixels = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        Self::with_ids(
            self.channels,
            self.height,
            self.width,
            self.class_count,
            pixels,
            indices.iter().map(|&i| self.labels[i]).collect(),
            indices.iter().map(|&i| self.ids[i]).collect(),
        )
    }

    /// Appends images (`image_len` bytes each) with their labels and ids.
    pub fn extend(&mut self, pixels: &[u8], labels: &[usize], split: Split) -> Result<(), DataError> {
        if pixels.len() != labels.len() * self.image_len() {
            return Err(DataError::CountMismatch {
                images: pixels.len() / self.image_len(),
                labels: labels.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= self.class_count) {
            return Err(DataError::Invalid(format!(
                "label {l} outside {} classes",
                self.class_count
            )));
        }
        let start = self.ids.iter().filter(|id| id.split == split).count() as u32;
        self.pixels.extend_from_slice(pixels);
        self.labels.extend(labels.iter().map(|&l| l as u8));
        self.ids.extend((0..labels.len() as u32).map(|k| SampleId {
            split,
            index: start + k,
        }));
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_owned(),
        source,
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, DataError> {
    let mut file = File::open(path).map_err(io_err(path))?;
    let mut bytes = Vec::new();
    if is_gz(path) {
        GzDecoder::new(file).read_to_end(&mut bytes).map_err(io_err(path))?;
    } else {
        file.read_to_end(&mut bytes).map_err(io_err(path))?;
    }
    Ok(bytes)
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path, what: &str) -> Result<u32, DataError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| DataError::Truncated {
            path: path.to_owned(),
            offset,
            detail: format!("missing {what}"),
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<(), DataError> {
    let found = be_u32(bytes, 0, path, "magic number")?;
    if found != expected {
        return Err(DataError::BadMagic {
            path: path.to_owned(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Parses an IDX image file body: returns (count, rows, cols, pixels).
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>), DataError> {
    check_magic(bytes, IMAGES_MAGIC, path)?;
    let count = be_u32(bytes, 4, path, "image count")? as usize;
    let rows = be_u32(bytes, 8, path, "row count")? as usize;
    let cols = be_u32(bytes, 12, path, "column count")? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(DataError::Truncated {
            path: path.to_owned(),
            offset: bytes.len(),
            detail: format!("expected {need} pixel bytes, found {}", body.len()),
        });
    }
    Ok((count, rows, cols, body[..need].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>, DataError> {
    check_magic(bytes, LABELS_MAGIC, path)?;
    let count = be_u32(bytes, 4, path, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(DataError::Truncated {
            path: path.to_owned(),
            offset: bytes.len(),
            detail: format!("expected {count} label bytes, found {}", body.len()),
        });
    }
    Ok(body[..count].to_vec())
}

/// Loads an IDX image/label pair (gzip-compressed when the name ends in `.gz`).
/// The class count is one past the largest label.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<ImageDataset, DataError> {
    let (count, rows, cols, pixels) = parse_idx_images(&read_maybe_gz(images_path)?, images_path)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels_path)?, labels_path)?;
    if count != labels.len() {
        return Err(DataError::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    let classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    ImageDataset::new(1, rows, cols, classes, pixels, labels, split)
}

fn write_maybe_gz(path: &Path, payload: &[u8]) -> Result<(), DataError> {
    let file = File::create(path).map_err(io_err(path))?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(file, flate2::Compression::default());
        enc.write_all(payload).map_err(io_err(path))?;
        enc.finish().map_err(io_err(path))?;
    } else {
        let mut file = file;
        file.write_all(payload).map_err(io_err(path))?;
    }
    Ok(())
}

/// Writes single-channel datasets as an IDX pair.
pub fn write_idx(ds: &ImageDataset, images_path: &Path, labels_path: &Path) -> Result<(), DataError> {
    if ds.channels != 1 {
        return Err(DataError::Invalid(
            "IDX export supports single-channel images only".into(),
        ));
    }
    let mut img = Vec::with_capacity(16 + ds.pixels.len());
    for v in [IMAGES_MAGIC, ds.len() as u32, ds.height as u32, ds.width as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(&ds.pixels);
    let mut lab = Vec::with_capacity(8 + ds.len());
    for v in [LABELS_MAGIC, ds.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(&ds.labels);
    write_maybe_gz(images_path, &img)?;
    write_maybe_gz(labels_path, &lab)
}

/// Per-class retained counts. `counts[r]` applies to class `class_order[r]`
/// (identity when absent), so a ranked table can be mapped onto native ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceProfile {
    pub counts: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_order: Option<Vec<usize>>,
}

impl ImbalanceProfile {
    pub fn new(counts: Vec<usize>, seed: u64) -> Self {
        Self {
            counts,
            seed,
            class_order: None,
        }
    }

    pub fn mnist(seed: u64) -> Self {
        Self::new(MNIST_TRAIN_COUNTS.to_vec(), seed)
    }

    /// The MNIST table scaled by 1/10 (floor, at least 4): keeps the 100:1 ratio.
    pub fn desk(seed: u64) -> Self {
        Self::new(MNIST_TRAIN_COUNTS.iter().map(|&c| (c / 10).max(4)).collect(), seed)
    }

    /// Geometric ladder: class `c` of `classes` keeps
    /// `round(majority * ratio^(-c / (classes - 1)))`, at least 1.
    pub fn geometric(majority: usize, ratio: f64, classes: usize, seed: u64) -> Result<Self, DataError> {
        if classes == 0 || majority == 0 || !(ratio >= 1.0) || !ratio.is_finite() {
            return Err(DataError::Invalid(format!(
                "geometric profile needs classes >= 1, majority >= 1, ratio >= 1 (got {classes}, {majority}, {ratio})"
            )));
        }
        let counts = (0..classes)
            .map(|c| {
                let exponent = if classes == 1 {
                    0.0
                } else {
                    -(c as f64) / (classes - 1) as f64
                };
                ((majority as f64 * ratio.powf(exponent)).round() as usize).max(1)
            })
            .collect();
        Ok(Self::new(counts, seed))
    }

    /// Requested count per native class id.
    pub fn per_class(&self) -> Result<Vec<usize>, DataError> {
        let order: Vec<usize> = match &self.class_order {
            None => (0..self.counts.len()).collect(),
            Some(o) => o.clone(),
        };
        if order.len() != self.counts.len() {
            return Err(DataError::Invalid("class_order must list one class per count".into()));
        }
        let mut per_class = vec![None; self.counts.len()];
        for (&class, &count) in order.iter().zip(&self.counts) {
            match per_class.get_mut(class) {
                Some(slot @ None) => *slot = Some(count),
                _ => return Err(DataError::Invalid("class_order must be a permutation".into())),
            }
        }
        Ok(per_class
            .into_iter()
            .map(|c| c.expect("permutation fills every slot"))
            .collect())
    }

    /// Majority count over smallest count.
    pub fn ratio(&self) -> f64 {
        let max = self.counts.iter().max().copied().unwrap_or(0);
        let min = self.counts.iter().min().copied().unwrap_or(0);
        max as f64 / min.max(1) as f64
    }
}

fn sample_per_class(ds: &ImageDataset, wanted: &[usize], seed: u64, stream: &str) -> Result<Vec<usize>, DataError> {
    if wanted.len() != ds.class_count {
        return Err(DataError::Invalid(format!(
            "{} class counts for a dataset with {} classes",
            wanted.len(),
            ds.class_count
        )));
    }
    let mut chosen = Vec::with_capacity(wanted.iter().sum());
    for (class, &want) in wanted.iter().enumerate() {
        let members = ds.members(class);
        if want > members.len() {
            return Err(DataError::Infeasible {
                class,
                requested: want,
                available: members.len(),
            });
        }
        let mut rng = rng::stream(seed, &format!("{stream}/class/{class}"));
        chosen.extend(
            index::sample(&mut rng, members.len(), want)
                .into_iter()
                .map(|k| members[k]),
        );
    }
    let mut rng = rng::stream(seed, &format!("{stream}/order"));
    chosen.shuffle(&mut rng);
    Ok(chosen)
}

/// Keeps exactly `profile` instances per class, sampled without replacement,
/// in a seed-determined shuffled order.
pub fn apply_imbalance(ds: &ImageDataset, profile: &ImbalanceProfile) -> Result<ImageDataset, DataError> {
    if profile.counts.contains(&0) {
        return Err(DataError::Invalid(
            "every class must retain at least one instance".into(),
        ));
    }
    let wanted = profile.per_class()?;
    let chosen = sample_per_class(ds, &wanted, profile.seed, "imbalance")?;
    ds.subset(&chosen)
}

/// Draws the balanced and imbalanced test sets independently from the test pool.
pub fn build_test_sets(
    ds_test: &ImageDataset,
    balanced_counts: &[usize],
    imbalanced_counts: &[usize],
    seed: u64,
) -> Result<(ImageDataset, ImageDataset), DataError> {
    let balanced = ds_test.subset(&sample_per_class(ds_test, balanced_counts, seed, "test/balanced")?)?;
    let imbalanced = ds_test.subset(&sample_per_class(ds_test, imbalanced_counts, seed, "test/imbalanced")?)?;
    Ok((balanced, imbalanced))
}

/// Fold id per instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn held_out(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

/// Stratified k-fold assignment: within each class the shuffled members are
/// dealt round-robin, so per-class fold sizes differ by at most one. The deal
/// starts where the previous class stopped to even out total fold sizes.
pub fn make_folds(ds: &ImageDataset, k: usize, seed: u64) -> Result<FoldAssignment, DataError> {
    if k < 2 {
        return Err(DataError::Invalid("cross-validation needs k >= 2".into()));
    }
    let mut folds = vec![0; ds.len()];
    let mut next = 0;
    for class in 0..ds.class_count {
        let mut members = ds.members(class);
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(DataError::ClassTooSmall {
                class,
                size: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng::stream(seed, &format!("folds/class/{class}")));
        for i in members {
            folds[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { k, folds })
}

/// Maps pixels linearly from [0, 255] to [-1, 1] and centres each image on a
/// `size × size` canvas filled with -1. Output is `[N, C, size, size]`.
pub fn normalize(ds: &ImageDataset, size: usize) -> Result<Tensor<f32>, DataError> {
    if size < ds.height || size < ds.width {
        return Err(DataError::Invalid(format!(
            "cannot pad {}x{} images to {size}",
            ds.height, ds.width
        )));
    }
    let (top, left) = ((size - ds.height) / 2, (size - ds.width) / 2);
    let plane = size * size;
    let mut out = vec![-1.0f32; ds.len() * ds.channels * plane];
    for i in 0..ds.len() {
        let img = ds.image(i);
        for c in 0..ds.channels {
            for r in 0..ds.height {
                let src = &img[(c * ds.height + r) * ds.width..][..ds.width];
                let dst = &mut out[(i * ds.channels + c) * plane + (top + r) * size + left..][..ds.width];
                for (d, &p) in dst.iter_mut().zip(src) {
                    *d = 2.0 * p as f32 / 255.0 - 1.0;
                }
            }
        }
    }
    Tensor::new(vec![ds.len(), ds.channels, size, size], out).map_err(|e| DataError::Invalid(e.to_string()))
}

/// Inverse of [`normalize`]: crops the centred `height × width` window,
/// clips to [-1, 1] and rounds back to 8 bits.
pub fn denormalize(batch: &Tensor<f32>, height: usize, width: usize) -> Result<Vec<u8>, DataError> {
    let shape = batch.shape();
    if shape.len() != 4 || shape[2] < height || shape[3] < width {
        return Err(DataError::Invalid(format!(
            "cannot crop {height}x{width} from {shape:?}"
        )));
    }
    let (n, channels, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    let (top, left) = ((h - height) / 2, (w - width) / 2);
    let mut out = Vec::with_capacity(n * channels * height * width);
    for i in 0..n {
        let s = batch.sample(i);
        for c in 0..channels {
            for r in 0..height {
                for q in 0..width {
                    let v = s[(c * h + top + r) * w + left + q].clamp(-1.0, 1.0);
                    out.push(((v + 1.0) * 127.5).round() as u8);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(counts: &[usize]) -> ImageDataset {
        let labels: Vec<u8> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat(c as u8).take(n))
            .collect();
        let pixels = (0..labels.len() * 4).map(|i| (i % 251) as u8).collect();
        ImageDataset::new(1, 2, 2, counts.len(), pixels, labels, Split::Train).unwrap()
    }

    #[test]
    fn desk_profile_keeps_ratio() {
        let p = ImbalanceProfile::desk(0);
        assert_eq!(p.counts, vec![400, 200, 100, 75, 50, 35, 20, 10, 6, 4]);
        assert_eq!(p.ratio(), 100.0);
        assert_eq!(ImbalanceProfile::mnist(0).ratio(), 100.0);
    }

    #[test]
    fn geometric_ladder() {
        let p = ImbalanceProfile::geometric(400, 100.0, 10, 0).unwrap();
        assert_eq!(p.counts[0], 400);
        assert_eq!(p.counts[9], 4);
        assert!(p.counts.windows(2).all(|w| w[0] >= w[1]));
        let flat = ImbalanceProfile::geometric(400, 1.0, 10, 0).unwrap();
        assert!(flat.counts.iter().all(|&c| c == 400));
        assert_eq!(ImbalanceProfile::geometric(400, 400.0, 10, 0).unwrap().counts[9], 1);
    }

    #[test]
    fn class_order_permutes() {
        let mut p = ImbalanceProfile::new(vec![3, 2, 1], 0);
        p.class_order = Some(vec![2, 0, 1]);
        assert_eq!(p.per_class().unwrap(), vec![2, 1, 3]);
        p.class_order = Some(vec![0, 0, 1]);
        assert!(p.per_class().is_err());
    }

    #[test]
    fn imbalance_histogram_and_no_duplicates() {
        let ds = toy(&[10, 10, 10]);
        let out = apply_imbalance(&ds, &ImbalanceProfile::new(vec![7, 3, 1], 9)).unwrap();
        assert_eq!(out.class_counts(), vec![7, 3, 1]);
        let mut ids: Vec<_> = out.ids().iter().map(|id| id.index).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 11);
        assert_eq!(
            out,
            apply_imbalance(&ds, &ImbalanceProfile::new(vec![7, 3, 1], 9)).unwrap()
        );
    }

    #[test]
    fn full_profile_is_permutation() {
        let ds = toy(&[4, 5]);
        let out = apply_imbalance(&ds, &ImbalanceProfile::new(vec![4, 5], 1)).unwrap();
        assert_eq!(out.class_counts(), ds.class_counts());
        let mut a: Vec<u32> = out.ids().iter().map(|i| i.index).collect();
        a.sort();
        assert_eq!(a, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn infeasible_profile_rejected() {
        let ds = toy(&[4, 5]);
        let err = apply_imbalance(&ds, &ImbalanceProfile::new(vec![5, 5], 1)).unwrap_err();
        assert!(matches!(
            err,
            DataError::Infeasible {
                class: 0,
                requested: 5,
                available: 4
            }
        ));
    }

    #[test]
    fn test_sets_match_histograms() {
        let ds = toy(&[6, 6, 6]);
        let (b, i) = build_test_sets(&ds, &[6, 6, 6], &[4, 2, 1], 3).unwrap();
        assert_eq!(b.class_counts(), vec![6, 6, 6]);
        assert_eq!(i.class_counts(), vec![4, 2, 1]);
        assert!(build_test_sets(&ds, &[7, 6, 6], &[1, 1, 1], 3).is_err());
    }

    #[test]
    fn folds_are_stratified() {
        let ds = toy(&[10, 10, 11]);
        let f = make_folds(&ds, 5, 2).unwrap();
        for class in 0..3 {
            let mut per_fold = [0; 5];
            for i in ds.members(class) {
                per_fold[f.folds[i]] += 1;
            }
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            assert!(hi - lo <= 1, "{per_fold:?}");
            if class < 2 {
                assert!(per_fold.iter().all(|&c| c == 2));
            }
        }
        let mut all: Vec<usize> = (0..5).flat_map(|k| f.held_out(k)).collect();
        all.sort();
        assert_eq!(all, (0..31).collect::<Vec<_>>());
    }

    #[test]
    fn folds_reject_small_class() {
        let ds = toy(&[10, 4]);
        assert!(matches!(
            make_folds(&ds, 5, 0),
            Err(DataError::ClassTooSmall {
                class: 1,
                size: 4,
                k: 5
            })
        ));
        assert!(make_folds(&ds, 2, 0).is_ok());
    }

    #[test]
    fn normalize_maps_range_and_pads() {
        let ds = ImageDataset::new(1, 2, 2, 1, vec![0, 255, 128, 7], vec![0], Split::Train).unwrap();
        let t = normalize(&ds, 6).unwrap();
        assert_eq!(t.shape(), &[1, 1, 6, 6]);
        let d = t.data();
        assert_eq!(d[2 * 6 + 2], -1.0);
        assert_eq!(d[2 * 6 + 3], 1.0);
        assert!((d[3 * 6 + 2] - (2.0 * 128.0 / 255.0 - 1.0)).abs() < 1e-7);
        assert_eq!(d[0], -1.0);
        assert_eq!(d[5 * 6 + 5], -1.0);
        assert_eq!(denormalize(&t, 2, 2).unwrap(), vec![0, 255, 128, 7]);
    }

    #[test]
    fn idx_round_trip_and_magic_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy(&[2, 1]);
        let (ip, lp) = (dir.path().join("i.idx.gz"), dir.path().join("l.idx"));
        write_idx(&ds, &ip, &lp).unwrap();
        let back = load_idx(&ip, &lp, Split::Train).unwrap();
        assert_eq!(back.pixels(), ds.pixels());
        assert_eq!(back.labels(), ds.labels());
        match load_idx(&ip, &ip, Split::Train) {
            Err(DataError::BadMagic { found, expected, .. }) => {
                assert_eq!((found, expected), (IMAGES_MAGIC, LABELS_MAGIC));
            }
            other => panic!("{other:?}"),
        }
    }
}
