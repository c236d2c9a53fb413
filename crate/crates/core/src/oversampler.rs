//! Balancing by synthesis: SMOTE in the autoencoder's latent space (decoded
//! back to images) or directly on pixels, plus PNG grids of the results.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{self, DataError, ImageDataset, Split};
use crate::nn::NnError;
use crate::raster::{self, RasterError};
use crate::smote::{self, LabeledVectors, SmoteConfig, SmoteError, SmoteOutput};
use crate::tensor::Tensor;
use crate::trainer::Autoencoder;

/// Images pushed through the networks at once.
const CHUNK: usize = 256;
/// Pixels between grid cells and around the border.
pub const GRID_GAP: usize = 2;

#[derive(Debug, Error)]
pub enum OversampleError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Smote(#[from] SmoteError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("{0}")]
    Plan(String),
}

/// Latent codes with their labels.
pub type LatentBatch = LabeledVectors;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationPlan {
    /// Synthetic samples per class; absent means "top every class up to the
    /// majority count".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<usize>>,
    pub k: usize,
    pub seed: u64,
}

impl Default for GenerationPlan {
    fn default() -> Self {
        Self {
            counts: None,
            k: smote::DEFAULT_K,
            seed: 0,
        }
    }
}

impl GenerationPlan {
    pub fn balanced(k: usize, seed: u64) -> Self {
        Self { counts: None, k, seed }
    }

    /// Synthetic count per class for a dataset with `current` counts.
    pub fn synthetic_counts(&self, current: &[usize]) -> Result<Vec<usize>, OversampleError> {
        match &self.counts {
            Some(c) if c.len() != current.len() => Err(OversampleError::Plan(format!(
                "plan lists {} classes, dataset has {}",
                c.len(),
                current.len()
            ))),
            Some(c) => Ok(c.clone()),
            None => {
                let max = current.iter().copied().max().unwrap_or(0);
                Ok(current.iter().map(|&c| max - c).collect())
            }
        }
    }
}

/// Contiguous rows of one class's synthetic samples in an augmented dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticRange {
    pub class: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct Augmented {
    /// Originals first, unchanged, then synthetics grouped by class.
    pub dataset: ImageDataset,
    pub ranges: Vec<SyntheticRange>,
    /// Interpolation record in the space SMOTE ran in.
    pub smote: SmoteOutput,
    pub original_len: usize,
}

impl Augmented {
    /// Synthetic images of `class` as their own dataset.
    pub fn synthetic_of(&self, class: usize) -> Option<ImageDataset> {
        let r = self.ranges.iter().find(|r| r.class == class && r.end > r.start)?;
        self.dataset.subset(&(r.start..r.end).collect::<Vec<_>>()).ok()
    }
}

fn pad_size(ds: &ImageDataset, ae: &Autoencoder) -> Result<usize, OversampleError> {
    let shape = &ae.encoder_spec.input_shape;
    if shape.len() != 3 || shape[0] != ds.channels() || shape[1] != shape[2] {
        return Err(OversampleError::Plan(format!(
            "encoder input {shape:?} does not fit {}-channel images",
            ds.channels()
        )));
    }
    Ok(shape[1])
}

/// Eval-mode codes for every image, labels carried through.
pub fn encode_dataset(ae: &Autoencoder, ds: &ImageDataset) -> Result<LatentBatch, OversampleError> {
    let size = pad_size(ds, ae)?;
    let mut codes = Vec::with_capacity(ds.len() * ae.latent_dim());
    for start in (0..ds.len()).step_by(CHUNK) {
        let idx: Vec<usize> = (start..(start + CHUNK).min(ds.len())).collect();
        let batch = data::normalize(&ds.subset(&idx)?, size)?;
        codes.extend_from_slice(ae.encode(&batch)?.data());
    }
    Ok(LabeledVectors::new(ae.latent_dim(), codes, ds.labels())?)
}

/// Decodes latent rows to 8-bit images of the dataset's geometry.
pub fn decode_codes(
    ae: &Autoencoder,
    codes: &LabeledVectors,
    height: usize,
    width: usize,
) -> Result<Vec<u8>, OversampleError> {
    let mut out = Vec::new();
    let dim = codes.dim();
    for start in (0..codes.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(codes.len());
        let mut shape = vec![end - start];
        shape.extend_from_slice(&ae.decoder_spec.input_shape);
        let batch = Tensor::new(shape, codes.data()[start * dim..end * dim].to_vec()).map_err(NnError::from)?;
        let images = ae.decode(&batch)?;
        if !images.is_finite() {
            return Err(NnError::NonFinite("decoded images".into()).into());
        }
        out.extend(data::denormalize(&images, height, width)?);
    }
    Ok(out)
}

fn append_synthetic(ds: &ImageDataset, pixels: &[u8], out: SmoteOutput) -> Result<Augmented, OversampleError> {
    let mut dataset = ds.clone();
    dataset.extend(pixels, out.synthetic.labels(), Split::Synthetic)?;
    let mut ranges: Vec<SyntheticRange> = Vec::new();
    for (i, &class) in out.synthetic.labels().iter().enumerate() {
        let row = ds.len() + i;
        match ranges.last_mut() {
            Some(r) if r.class == class => r.end = row + 1,
            _ => ranges.push(SyntheticRange {
                class,
                start: row,
                end: row + 1,
            }),
        }
    }
    Ok(Augmented {
        dataset,
        ranges,
        smote: out,
        original_len: ds.len(),
    })
}

fn smote_targets(ds: &ImageDataset, plan: &GenerationPlan) -> Result<SmoteConfig, OversampleError> {
    let current = ds.class_counts();
    let extra = plan.synthetic_counts(&current)?;
    Ok(SmoteConfig {
        k: plan.k,
        targets: current.iter().zip(&extra).map(|(c, e)| c + e).collect(),
        seed: plan.seed,
    })
}

/// Encodes, oversamples the codes with SMOTE and decodes the new codes.
/// Originals pass through untouched.
pub fn generate_balanced(
    ae: &Autoencoder,
    ds: &ImageDataset,
    plan: &GenerationPlan,
) -> Result<Augmented, OversampleError> {
    let cfg = smote_targets(ds, plan)?;
    let out = if cfg.targets == ds.class_counts() {
        SmoteOutput {
            synthetic: LabeledVectors::empty(ae.latent_dim()),
            origins: Vec::new(),
        }
    } else {
        smote::oversample(&encode_dataset(ae, ds)?, &cfg)?
    };
    let pixels = decode_codes(ae, &out.synthetic, ds.height(), ds.width())?;
    append_synthetic(ds, &pixels, out)
}

/// SMOTE on raw pixel vectors, rounded back to 8 bits.
pub fn pixel_smote(ds: &ImageDataset, plan: &GenerationPlan) -> Result<Augmented, OversampleError> {
    let cfg = smote_targets(ds, plan)?;
    let vectors = LabeledVectors::new(
        ds.image_len(),
        ds.pixels().iter().map(|&p| p as f32).collect(),
        ds.labels(),
    )?;
    let out = smote::oversample(&vectors, &cfg)?;
    let pixels: Vec<u8> = out
        .synthetic
        .data()
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    append_synthetic(ds, &pixels, out)
}

/// Pixel size of a `rows × cols` grid of `h × w` cells.
pub fn grid_dimensions(rows: usize, cols: usize, h: usize, w: usize) -> (usize, usize) {
    (
        cols * w + (cols - 1) * GRID_GAP + 2 * GRID_GAP,
        rows * h + (rows - 1) * GRID_GAP + 2 * GRID_GAP,
    )
}

/// Writes the first `rows × cols` images as a PNG grid, row-major, with
/// black separators and border. Grayscale for one channel, RGB for three.
pub fn export_image_grid(images: &ImageDataset, rows: usize, cols: usize, path: &Path) -> Result<(), OversampleError> {
    if rows == 0 || cols == 0 || rows * cols > images.len() {
        return Err(OversampleError::Plan(format!(
            "a {rows}x{cols} grid needs between 1 and {} images",
            images.len()
        )));
    }
    let (h, w, ch) = (images.height(), images.width(), images.channels());
    let (gw, gh) = grid_dimensions(rows, cols, h, w);
    let mut canvas = vec![0u8; gw * gh * ch];
    for cell in 0..rows * cols {
        let (r, c) = (cell / cols, cell % cols);
        let (x0, y0) = (GRID_GAP + c * (w + GRID_GAP), GRID_GAP + r * (h + GRID_GAP));
        let img = images.image(cell);
        for y in 0..h {
            for x in 0..w {
                for k in 0..ch {
                    canvas[((y0 + y) * gw + x0 + x) * ch + k] = img[(k * h + y) * w + x];
                }
            }
        }
    }
    raster::write_png(path, gw, gh, ch, &canvas)?;
    Ok(())
}

/// Grid shape for `n` images with at most `max_side` rows and columns,
/// never needing more images than available.
pub fn grid_shape(n: usize, max_side: usize) -> Option<(usize, usize)> {
    if n == 0 || max_side == 0 {
        return None;
    }
    let cols = n.min(max_side);
    Some(((n / cols).min(max_side), cols))
}
